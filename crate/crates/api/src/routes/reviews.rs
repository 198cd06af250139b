use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use datadock_core::{DatasetId, Page, Review, ReviewChanges, ReviewId};
use serde::Deserialize;

use crate::error::ApiResult;
use crate::extract::{parse_id, AppState, Auth, JsonBody, PathParams, QueryParams, Viewer};
use crate::views::ReviewView;

#[derive(Deserialize)]
pub struct SubmitBody {
    rating: i64,
    #[serde(default)]
    comment: String,
}

#[derive(Deserialize)]
pub struct UpdateBody {
    rating: Option<i64>,
    comment: Option<String>,
}

pub async fn submit(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
    JsonBody(body): JsonBody<SubmitBody>,
) -> ApiResult<(StatusCode, Json<Review>)> {
    let dataset: DatasetId = parse_id(&id, "dataset")?;
    let author = auth.principal.id();
    let review = state
        .run(move |hub| hub.submit_review(author, dataset, body.rating, &body.comment))
        .await?;
    Ok((StatusCode::CREATED, Json(review)))
}

pub async fn list(
    State(state): State<AppState>,
    viewer: Viewer,
    PathParams(id): PathParams<String>,
    params: QueryParams,
) -> ApiResult<Json<Page<ReviewView>>> {
    let dataset: DatasetId = parse_id(&id, "dataset")?;
    let viewer = viewer.id();
    let req = params.page()?;
    let page = state
        .run(move |hub| {
            let page = hub.list_reviews(viewer, dataset, req)?;
            let mut items = Vec::with_capacity(page.items.len());
            for review in &page.items {
                items.push(hub.user_by_id(review.author_id)?.username);
            }
            let mut names = items.into_iter();
            Ok(page.map(|review| ReviewView {
                review,
                author_username: names.next().unwrap_or_default(),
            }))
        })
        .await?;
    Ok(Json(page))
}

pub async fn update(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
    JsonBody(body): JsonBody<UpdateBody>,
) -> ApiResult<Json<Review>> {
    let id: ReviewId = parse_id(&id, "review")?;
    let caller = auth.principal.id();
    let changes = ReviewChanges {
        rating: body.rating,
        comment: body.comment,
    };
    Ok(Json(
        state
            .run(move |hub| hub.update_review(caller, id, changes))
            .await?,
    ))
}

pub async fn delete(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
) -> ApiResult<StatusCode> {
    let id: ReviewId = parse_id(&id, "review")?;
    state
        .run(move |hub| hub.delete_review(&auth.principal.user, id))
        .await?;
    Ok(StatusCode::NO_CONTENT)
}
