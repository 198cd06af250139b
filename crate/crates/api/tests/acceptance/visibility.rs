use axum::http::StatusCode;
use serde_json::json;

use crate::support::{all_pages, TestApp};

#[derive(Clone, Copy, Debug)]
enum Vis {
    Public,
    Org,
    Private,
}

#[derive(Clone, Copy, Debug)]
enum Role {
    Owner,
    Member,
    Stranger,
    Anonymous,
}

/// The access table, written out case by case.
fn oracle(vis: Vis, role: Role) -> bool {
    match (vis, role) {
        (_, Role::Anonymous) => false,
        (_, Role::Owner) => true,
        (Vis::Public, _) => true,
        (Vis::Org, Role::Member) => true,
        (Vis::Org, Role::Stranger) => false,
        (Vis::Private, _) => false,
    }
}

pub async fn run() -> String {
    let app = TestApp::new();
    let owner = app.register("owner").await;
    let member = app.register("member").await;
    let stranger = app.register("stranger").await;
    let org = app.create_org(&owner.token, "lab").await;
    app.join_org(&member.token, &org).await;

    let mut datasets = Vec::new();
    for (vis, meta) in [
        (Vis::Public, json!({"name": "open", "visibility": "public"})),
        (
            Vis::Org,
            json!({"name": "lab only", "visibility": "org", "org_ids": [org]}),
        ),
        (
            Vis::Private,
            json!({"name": "mine", "visibility": "private"}),
        ),
    ] {
        let id = app
            .create_dataset(&owner.token, meta, &[("data/table.csv", b"a,b\n1,2\n")])
            .await;
        datasets.push((vis, id));
    }

    let mut cases = 0;
    for (vis, id) in &datasets {
        for role in [Role::Owner, Role::Member, Role::Stranger, Role::Anonymous] {
            let token = match role {
                Role::Owner => Some(owner.token.as_str()),
                Role::Member => Some(member.token.as_str()),
                Role::Stranger => Some(stranger.token.as_str()),
                Role::Anonymous => None,
            };
            let allowed = oracle(*vis, role);
            let (status, code) = match (allowed, token) {
                (true, _) => (StatusCode::OK, None),
                (false, Some(_)) => (StatusCode::NOT_FOUND, Some("not_found")),
                (false, None) => (StatusCode::UNAUTHORIZED, Some("unauthorized")),
            };
            for route in [
                format!("/api/datasets/{id}"),
                format!("/api/datasets/{id}/archive"),
                format!("/api/datasets/{id}/files/data/table.csv"),
                format!("/api/datasets/{id}/reviews"),
            ] {
                let reply = app.get(&route, token).await;
                assert_eq!(
                    (reply.status, reply.code().as_deref()),
                    (status, code),
                    "{vis:?} x {role:?} on {route}"
                );
            }
            match token {
                Some(token) => {
                    let found = all_pages(&app, "/api/datasets", Some(token))
                        .await
                        .iter()
                        .any(|d| d["id"] == json!(id));
                    assert_eq!(found, allowed, "{vis:?} x {role:?} in search");
                }
                None => {
                    let reply = app.get("/api/datasets", None).await;
                    assert_eq!(reply.status, StatusCode::UNAUTHORIZED, "anonymous search");
                }
            }
            cases += 1;
        }
    }
    assert_eq!(cases, 12);
    format!("{cases}/12 cases match across get, search, archive, file, reviews")
}
