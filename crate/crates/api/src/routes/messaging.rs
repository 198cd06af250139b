use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use datadock_core::{
    Conversation, ConversationId, ConversationView, Message, MessageView, Page, UserId,
};
use serde::Deserialize;

use crate::error::ApiResult;
use crate::extract::{parse_id, AppState, Auth, JsonBody, PathParams, QueryParams};

#[derive(Deserialize)]
pub struct StartBody {
    user_id: UserId,
}

#[derive(Deserialize)]
pub struct SendBody {
    body: String,
}

pub async fn start(
    State(state): State<AppState>,
    auth: Auth,
    JsonBody(body): JsonBody<StartBody>,
) -> ApiResult<Json<Conversation>> {
    let me = auth.principal.id();
    Ok(Json(
        state
            .run(move |hub| hub.start_conversation(me, body.user_id))
            .await?,
    ))
}

pub async fn list(
    State(state): State<AppState>,
    auth: Auth,
    params: QueryParams,
) -> ApiResult<Json<Page<ConversationView>>> {
    let me = auth.principal.id();
    let req = params.page()?;
    Ok(Json(
        state
            .run(move |hub| hub.list_conversations(me, req))
            .await?,
    ))
}

pub async fn messages(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
    params: QueryParams,
) -> ApiResult<Json<Page<MessageView>>> {
    let conversation: ConversationId = parse_id(&id, "conversation")?;
    let me = auth.principal.id();
    let req = params.page()?;
    Ok(Json(
        state
            .run(move |hub| hub.list_messages(me, conversation, req))
            .await?,
    ))
}

pub async fn send(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
    JsonBody(body): JsonBody<SendBody>,
) -> ApiResult<(StatusCode, Json<Message>)> {
    let conversation: ConversationId = parse_id(&id, "conversation")?;
    let me = auth.principal.id();
    let message = state
        .run(move |hub| hub.send_message(me, conversation, &body.body))
        .await?;
    Ok((StatusCode::CREATED, Json(message)))
}
