//! HTTP/JSON interface over [`datadock_core::DataHub`].

mod error;
mod extract;
mod routes;
mod upload;
mod views;

use std::sync::Arc;

use axum::http::{header, HeaderValue, Method};
use axum::Router;
use datadock_core::DataHub;
use tower_http::cors::CorsLayer;

pub use error::{ApiError, ApiResult};
pub use extract::AppState;
pub use routes::router;
pub use views::{DatasetView, LoginResponse, ReviewView, UserView};

/// Builds the full application. Without an origin no CORS headers are sent,
/// so browsers only allow same-origin callers.
pub fn app(hub: Arc<DataHub>, cors_origin: Option<&str>) -> Result<Router, ApiError> {
    let router = router(AppState { hub });
    let Some(origin) = cors_origin else {
        return Ok(router);
    };
    let origin = HeaderValue::from_str(origin)
        .map_err(|_| ApiError::validation("cors_origin", "not a valid header value"))?;
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::PATCH, Method::DELETE])
        .allow_headers([header::AUTHORIZATION, header::CONTENT_TYPE]);
    Ok(router.layer(cors))
}
