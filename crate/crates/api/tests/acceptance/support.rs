use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, HeaderMap, Method, Request, StatusCode};
use axum::Router;
use bytes::Bytes;
use datadock_api::app;
use datadock_core::{DataHub, HubConfig, ManualClock, PasswordCost, Timestamp};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

pub const PASSWORD: &str = "correct horse battery";
pub const START_MICROS: i64 = 1_700_000_000_000_000;

pub struct TestApp {
    pub dir: TempDir,
    pub hub: Arc<DataHub>,
    pub clock: Arc<ManualClock>,
    pub router: Router,
}

pub struct Reply {
    pub status: StatusCode,
    pub headers: HeaderMap,
    pub body: Bytes,
}

impl Reply {
    pub fn json(&self) -> Value {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| {
            panic!(
                "status {} body is not JSON ({e}): {:?}",
                self.status,
                String::from_utf8_lossy(&self.body)
            )
        })
    }

    pub fn code(&self) -> Option<String> {
        serde_json::from_slice::<Value>(&self.body)
            .ok()
            .and_then(|v| v["code"].as_str().map(str::to_owned))
    }

    #[track_caller]
    pub fn expect(self, status: StatusCode) -> Self {
        assert_eq!(
            self.status,
            status,
            "unexpected status, body: {}",
            String::from_utf8_lossy(&self.body)
        );
        self
    }
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub username: String,
    pub token: String,
}

pub fn config(data_dir: PathBuf) -> HubConfig {
    HubConfig {
        password_cost: PasswordCost::insecure_fast(),
        ..HubConfig::new(data_dir)
    }
}

impl TestApp {
    pub fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let clock = Arc::new(ManualClock::new(Timestamp::from_micros(START_MICROS)));
        let hub = DataHub::open_with_clock(config(dir.path().join("data")), clock.clone()).unwrap();
        Self::assemble(dir, Arc::new(hub), clock)
    }

    pub fn assemble(dir: TempDir, hub: Arc<DataHub>, clock: Arc<ManualClock>) -> Self {
        let router = app(hub.clone(), None).unwrap();
        TestApp {
            dir,
            hub,
            clock,
            router,
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.dir.path().join("data")
    }

    pub async fn call(&self, req: Request<Body>) -> Reply {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let body = resp.into_body().collect().await.unwrap().to_bytes();
        Reply {
            status,
            headers,
            body,
        }
    }

    pub async fn send(
        &self,
        method: Method,
        path: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> Reply {
        let mut req = Request::builder().method(method).uri(path);
        if let Some(token) = token {
            req = req.header(header::AUTHORIZATION, format!("Token {token}"));
        }
        let body = match body {
            Some(v) => {
                req = req.header(header::CONTENT_TYPE, "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        self.call(req.body(body).unwrap()).await
    }

    pub async fn get(&self, path: &str, token: Option<&str>) -> Reply {
        self.send(Method::GET, path, token, None).await
    }

    pub async fn post(&self, path: &str, token: Option<&str>, body: Value) -> Reply {
        self.send(Method::POST, path, token, Some(body)).await
    }

    pub async fn register(&self, username: &str) -> Session {
        let user = self
            .post(
                "/api/auth/register",
                None,
                json!({"username": username, "email": format!("{username}@example.org"), "password": PASSWORD}),
            )
            .await
            .expect(StatusCode::CREATED)
            .json();
        let token = self.login(username).await;
        Session {
            id: user["id"].as_str().unwrap().to_owned(),
            username: username.to_owned(),
            token,
        }
    }

    pub async fn login(&self, username: &str) -> String {
        let reply = self
            .post(
                "/api/auth/login",
                None,
                json!({"username": username, "password": PASSWORD}),
            )
            .await
            .expect(StatusCode::OK)
            .json();
        reply["token"].as_str().unwrap().to_owned()
    }

    pub async fn upload(&self, token: &str, meta: &Value, files: &[(&str, &[u8])]) -> Reply {
        let (content_type, body) = multipart(Some(meta), files);
        let req = Request::builder()
            .method(Method::POST)
            .uri("/api/datasets")
            .header(header::AUTHORIZATION, format!("Token {token}"))
            .header(header::CONTENT_TYPE, content_type)
            .body(Body::from(body))
            .unwrap();
        self.call(req).await
    }

    /// Uploads and returns the new dataset id.
    pub async fn create_dataset(
        &self,
        token: &str,
        meta: Value,
        files: &[(&str, &[u8])],
    ) -> String {
        let reply = self
            .upload(token, &meta, files)
            .await
            .expect(StatusCode::CREATED);
        reply.json()["id"].as_str().unwrap().to_owned()
    }

    pub async fn create_org(&self, token: &str, name: &str) -> String {
        let reply = self
            .post("/api/orgs", Some(token), json!({"name": name}))
            .await
            .expect(StatusCode::CREATED);
        reply.json()["id"].as_str().unwrap().to_owned()
    }

    pub async fn join_org(&self, token: &str, org: &str) {
        self.post(&format!("/api/orgs/{org}/join"), Some(token), json!({}))
            .await
            .expect(StatusCode::CREATED);
    }
}

const BOUNDARY: &str = "----datadock-test-boundary-7MA4YWxkTrZu0gW";

/// Encodes a multipart/form-data body with an optional `meta` part and one
/// `file` part per entry.
pub fn multipart(meta: Option<&Value>, files: &[(&str, &[u8])]) -> (String, Vec<u8>) {
    let mut body = Vec::new();
    if let Some(meta) = meta {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"meta\"\r\n\
                 Content-Type: application/json\r\n\r\n{meta}\r\n"
            )
            .as_bytes(),
        );
    }
    for (path, bytes) in files {
        body.extend_from_slice(
            format!(
                "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"file\"; filename=\"{path}\"\r\n\
                 Content-Type: application/octet-stream\r\n\r\n"
            )
            .as_bytes(),
        );
        body.extend_from_slice(bytes);
        body.extend_from_slice(b"\r\n");
    }
    body.extend_from_slice(format!("--{BOUNDARY}--\r\n").as_bytes());
    (format!("multipart/form-data; boundary={BOUNDARY}"), body)
}

pub fn public_meta(name: &str) -> Value {
    json!({"name": name, "visibility": "public"})
}

/// Collects every item of a paged listing.
pub async fn all_pages(app: &TestApp, path: &str, token: Option<&str>) -> Vec<Value> {
    let sep = if path.contains('?') { '&' } else { '?' };
    let mut items = Vec::new();
    for page in 1.. {
        let reply = app
            .get(&format!("{path}{sep}page={page}&page_size=100"), token)
            .await
            .expect(StatusCode::OK)
            .json();
        let batch = reply["items"].as_array().unwrap().clone();
        let total = reply["total"].as_u64().unwrap() as usize;
        let empty = batch.is_empty();
        items.extend(batch);
        if empty || items.len() >= total {
            break;
        }
    }
    items
}
