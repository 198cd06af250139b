use axum::extract::State;
use axum::Json;
use datadock_core::{Notification, NotificationId, Page};
use serde::{Deserialize, Serialize};

use crate::error::ApiResult;
use crate::extract::{AppState, Auth, JsonBody, QueryParams};

#[derive(Deserialize)]
pub struct MarkReadBody {
    ids: Vec<NotificationId>,
}

#[derive(Serialize)]
pub struct MarkReadResponse {
    updated: usize,
}

pub async fn list(
    State(state): State<AppState>,
    auth: Auth,
    params: QueryParams,
) -> ApiResult<Json<Page<Notification>>> {
    let me = auth.principal.id();
    let unread_only = params.flag("unread")?;
    let req = params.page()?;
    Ok(Json(
        state
            .run(move |hub| hub.list_notifications(me, unread_only, req))
            .await?,
    ))
}

pub async fn mark_read(
    State(state): State<AppState>,
    auth: Auth,
    JsonBody(body): JsonBody<MarkReadBody>,
) -> ApiResult<Json<MarkReadResponse>> {
    let me = auth.principal.id();
    let updated = state.run(move |hub| hub.mark_read(me, &body.ids)).await?;
    Ok(Json(MarkReadResponse { updated }))
}
