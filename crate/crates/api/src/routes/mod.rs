mod accounts;
mod datasets;
mod messaging;
mod notifications;
mod orgs;
mod reviews;

use std::time::Instant;

use axum::extract::{DefaultBodyLimit, Request};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::extract::AppState;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/auth/register", post(accounts::register))
        .route("/api/auth/login", post(accounts::login))
        .route("/api/auth/logout", post(accounts::logout))
        .route(
            "/api/users/me",
            get(accounts::me)
                .patch(accounts::update_me)
                .delete(accounts::delete_me),
        )
        .route(
            "/api/datasets",
            get(datasets::search)
                .post(datasets::create)
                .layer(DefaultBodyLimit::disable()),
        )
        .route(
            "/api/datasets/{id}",
            get(datasets::get_one)
                .patch(datasets::update)
                .delete(datasets::delete),
        )
        .route("/api/datasets/{id}/archive", get(datasets::archive))
        .route("/api/datasets/{id}/files/{*path}", get(datasets::file))
        .route(
            "/api/datasets/{id}/reviews",
            get(reviews::list).post(reviews::submit),
        )
        .route(
            "/api/reviews/{id}",
            patch(reviews::update).delete(reviews::delete),
        )
        .route("/api/orgs", get(orgs::list).post(orgs::create))
        .route("/api/orgs/{id}/join", post(orgs::join))
        .route("/api/orgs/{id}/leave", post(orgs::leave))
        .route("/api/orgs/{id}/members", get(orgs::members))
        .route("/api/orgs/{id}/datasets", get(orgs::datasets))
        .route(
            "/api/conversations",
            get(messaging::list).post(messaging::start),
        )
        .route(
            "/api/conversations/{id}/messages",
            get(messaging::messages).post(messaging::send),
        )
        .route("/api/notifications", get(notifications::list))
        .route(
            "/api/notifications/mark-read",
            post(notifications::mark_read),
        )
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

async fn health() -> Json<Value> {
    Json(json!({"status": "ok"}))
}

async fn not_found() -> ApiError {
    ApiError::not_found("route")
}

async fn method_not_allowed() -> ApiError {
    ApiError::method_not_allowed()
}

async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_owned();
    let started = Instant::now();
    let response = next.run(req).await;
    tracing::info!(
        %method,
        %path,
        status = response.status().as_u16(),
        elapsed_ms = started.elapsed().as_secs_f64() * 1000.0,
        "request"
    );
    response
}
