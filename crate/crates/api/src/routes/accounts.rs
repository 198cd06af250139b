use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use datadock_core::ProfileChanges;
use serde::Deserialize;

use crate::error::ApiResult;
use crate::extract::{AppState, Auth, JsonBody};
use crate::views::{LoginResponse, UserView};

#[derive(Deserialize)]
pub struct RegisterBody {
    username: String,
    email: String,
    password: String,
    #[serde(default)]
    display_name: String,
}

#[derive(Deserialize)]
pub struct LoginBody {
    username: String,
    password: String,
}

#[derive(Deserialize)]
pub struct ProfileBody {
    display_name: Option<String>,
    email: Option<String>,
    password: Option<String>,
}

pub async fn register(
    State(state): State<AppState>,
    JsonBody(body): JsonBody<RegisterBody>,
) -> ApiResult<(StatusCode, Json<UserView>)> {
    let user = state
        .run(move |hub| {
            let display = if body.display_name.is_empty() {
                body.username.clone()
            } else {
                body.display_name
            };
            hub.register(&body.username, &body.email, &body.password, &display)
        })
        .await?;
    Ok((StatusCode::CREATED, Json(user.into())))
}

pub async fn login(
    State(state): State<AppState>,
    JsonBody(body): JsonBody<LoginBody>,
) -> ApiResult<Json<LoginResponse>> {
    let issued = state
        .run(move |hub| hub.login(&body.username, &body.password))
        .await?;
    Ok(Json(issued.into()))
}

pub async fn logout(State(state): State<AppState>, auth: Auth) -> ApiResult<StatusCode> {
    state.run(move |hub| hub.logout(&auth.secret)).await?;
    Ok(StatusCode::NO_CONTENT)
}

pub async fn me(auth: Auth) -> Json<UserView> {
    Json(auth.principal.user.into())
}

pub async fn update_me(
    State(state): State<AppState>,
    auth: Auth,
    JsonBody(body): JsonBody<ProfileBody>,
) -> ApiResult<Json<UserView>> {
    let changes = ProfileChanges {
        display_name: body.display_name,
        email: body.email,
        password: body.password,
    };
    let user = state
        .run(move |hub| hub.update_profile(&auth.principal, changes))
        .await?;
    Ok(Json(user.into()))
}

pub async fn delete_me(State(state): State<AppState>, auth: Auth) -> ApiResult<StatusCode> {
    state
        .run(move |hub| hub.delete_account(&auth.principal))
        .await?;
    Ok(StatusCode::NO_CONTENT)
}
