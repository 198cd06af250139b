use std::str::FromStr;
use std::sync::Arc;

use axum::extract::{FromRequest, FromRequestParts, Path, Request};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use datadock_core::hub::DEFAULT_PAGE_SIZE;
use datadock_core::{DataHub, PageRequest, Principal};
use serde::de::DeserializeOwned;

use crate::error::{ApiError, ApiResult};

#[derive(Clone)]
pub struct AppState {
    pub hub: Arc<DataHub>,
}

impl AppState {
    /// Runs blocking store work off the async executor.
    pub async fn run<T, F>(&self, work: F) -> ApiResult<T>
    where
        T: Send + 'static,
        F: FnOnce(&DataHub) -> datadock_core::Result<T> + Send + 'static,
    {
        let hub = self.hub.clone();
        tokio::task::spawn_blocking(move || work(&hub))
            .await
            .map_err(ApiError::internal)?
            .map_err(ApiError::from)
    }
}

fn bearer_secret(parts: &Parts) -> ApiResult<Option<String>> {
    let Some(value) = parts.headers.get(AUTHORIZATION) else {
        return Ok(None);
    };
    let value = value.to_str().map_err(|_| ApiError::unauthorized())?;
    match value.split_once(' ') {
        Some(("Token", secret)) if !secret.trim().is_empty() => Ok(Some(secret.trim().to_owned())),
        _ => Err(ApiError::unauthorized()),
    }
}

/// A request carrying a valid `Authorization: Token <secret>` header.
pub struct Auth {
    pub principal: Principal,
    pub secret: String,
}

impl FromRequestParts<AppState> for Auth {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> ApiResult<Self> {
        let secret = bearer_secret(parts)?.ok_or_else(ApiError::unauthorized)?;
        let presented = secret.clone();
        let principal = state.run(move |hub| hub.authenticate(&presented)).await?;
        Ok(Auth { principal, secret })
    }
}

/// Like [`Auth`], but lets requests without a header through when the hub
/// allows anonymous reads. A header that is present must still be valid.
pub struct Viewer(pub Option<Principal>);

impl Viewer {
    pub fn id(&self) -> Option<datadock_core::UserId> {
        self.0.as_ref().map(Principal::id)
    }
}

impl FromRequestParts<AppState> for Viewer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> ApiResult<Self> {
        match bearer_secret(parts)? {
            Some(secret) => {
                let principal = state.run(move |hub| hub.authenticate(&secret)).await?;
                Ok(Viewer(Some(principal)))
            }
            None if state.hub.config().allow_anon_read => Ok(Viewer(None)),
            None => Err(ApiError::unauthorized()),
        }
    }
}

/// JSON body whose rejections are reported as `validation_error`.
pub struct JsonBody<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for JsonBody<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> ApiResult<Self> {
        match axum::Json::<T>::from_request(req, state).await {
            Ok(axum::Json(value)) => Ok(JsonBody(value)),
            Err(e) => Err(ApiError::bad_request(e.body_text())),
        }
    }
}

/// Decoded query string. Keys may repeat (`tag=a&tag=b`).
pub struct QueryParams(Vec<(String, String)>);

impl QueryParams {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn all(&self, key: &str) -> Vec<String> {
        self.0
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.clone())
            .collect()
    }

    fn number(&self, key: &str, default: u32) -> ApiResult<u32> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw.trim().parse().map_err(|_| {
                ApiError::validation(key, format!("{key} must be a positive integer"))
            }),
        }
    }

    pub fn page(&self) -> ApiResult<PageRequest> {
        let page = self.number("page", 1)?;
        let page_size = self.number("page_size", DEFAULT_PAGE_SIZE)?;
        Ok(PageRequest::new(page, page_size)?)
    }

    pub fn flag(&self, key: &str) -> ApiResult<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(_) => Err(ApiError::validation(
                key,
                format!("{key} must be true or false"),
            )),
        }
    }
}

impl<S: Send + Sync> FromRequestParts<S> for QueryParams {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, _: &S) -> ApiResult<Self> {
        let query = parts.uri.query().unwrap_or("");
        Ok(QueryParams(
            form_urlencoded::parse(query.as_bytes())
                .into_owned()
                .collect(),
        ))
    }
}

/// Path parameters. A segment that does not decode names nothing, so it is a 404.
pub struct PathParams<T>(pub T);

impl<T: DeserializeOwned + Send, S: Send + Sync> FromRequestParts<S> for PathParams<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> ApiResult<Self> {
        match Path::<T>::from_request_parts(parts, state).await {
            Ok(Path(value)) => Ok(PathParams(value)),
            Err(e) => {
                tracing::debug!(path = %parts.uri.path(), err = %e.body_text(), "undecodable path");
                Err(ApiError::not_found("resource"))
            }
        }
    }
}

/// Parses a path id; malformed ids name nothing, so they are 404s.
pub fn parse_id<T: FromStr>(raw: &str, what: &str) -> ApiResult<T> {
    raw.parse().map_err(|_| ApiError::not_found(what))
}
