use axum::extract::State;
use axum::http::StatusCode;
use axum::Json;
use datadock_core::{DatasetSummary, MemberView, Membership, OrgId, Organization, Page};
use serde::Deserialize;

use crate::error::ApiResult;
use crate::extract::{parse_id, AppState, Auth, JsonBody, PathParams, QueryParams};

#[derive(Deserialize)]
pub struct CreateBody {
    name: String,
    #[serde(default)]
    description: String,
}

pub async fn create(
    State(state): State<AppState>,
    auth: Auth,
    JsonBody(body): JsonBody<CreateBody>,
) -> ApiResult<(StatusCode, Json<Organization>)> {
    let creator = auth.principal.id();
    let org = state
        .run(move |hub| hub.create_org(creator, &body.name, &body.description))
        .await?;
    Ok((StatusCode::CREATED, Json(org)))
}

pub async fn list(
    State(state): State<AppState>,
    _auth: Auth,
    params: QueryParams,
) -> ApiResult<Json<Page<Organization>>> {
    let req = params.page()?;
    Ok(Json(state.run(move |hub| hub.list_orgs(req)).await?))
}

pub async fn join(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
) -> ApiResult<(StatusCode, Json<Membership>)> {
    let org: OrgId = parse_id(&id, "organization")?;
    let user = auth.principal.id();
    let membership = state.run(move |hub| hub.join_org(user, org)).await?;
    Ok((StatusCode::CREATED, Json(membership)))
}

pub async fn leave(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
) -> ApiResult<StatusCode> {
    let org: OrgId = parse_id(&id, "organization")?;
    let user = auth.principal.id();
    state.run(move |hub| hub.leave_org(user, org)).await?;
    Ok(StatusCode::NO_CONTENT)
}

pub async fn members(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
    params: QueryParams,
) -> ApiResult<Json<Page<MemberView>>> {
    let org: OrgId = parse_id(&id, "organization")?;
    let viewer = auth.principal.id();
    let req = params.page()?;
    Ok(Json(
        state
            .run(move |hub| hub.list_members(viewer, org, req))
            .await?,
    ))
}

pub async fn datasets(
    State(state): State<AppState>,
    auth: Auth,
    PathParams(id): PathParams<String>,
    params: QueryParams,
) -> ApiResult<Json<Page<DatasetSummary>>> {
    let org: OrgId = parse_id(&id, "organization")?;
    let viewer = auth.principal.id();
    let req = params.page()?;
    Ok(Json(
        state
            .run(move |hub| hub.list_org_datasets(viewer, org, req))
            .await?,
    ))
}
