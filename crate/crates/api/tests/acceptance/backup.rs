use std::fs;
use std::io::Cursor;
use std::sync::Arc;

use axum::http::{Method, StatusCode};
use datadock_core::backup::restore;
use datadock_core::DataHub;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::support::{all_pages, config, public_meta, Session, TestApp};

/// Everything the API lets each user list or fetch, in a fixed request order.
async fn snapshot(app: &TestApp, users: &[Session]) -> Value {
    let mut per_user = Map::new();
    for user in users {
        let token = Some(user.token.as_str());
        let mut s = Map::new();
        s.insert(
            "me".into(),
            app.get("/api/users/me", token)
                .await
                .expect(StatusCode::OK)
                .json(),
        );

        let datasets = all_pages(app, "/api/datasets", token).await;
        let mut details = Vec::new();
        for d in &datasets {
            let id = d["id"].as_str().unwrap();
            let detail = app
                .get(&format!("/api/datasets/{id}"), token)
                .await
                .expect(StatusCode::OK)
                .json();
            let mut files = Map::new();
            for entry in detail["entries"].as_array().unwrap() {
                let path = entry["path"].as_str().unwrap();
                let reply = app
                    .get(&format!("/api/datasets/{id}/files/{path}"), token)
                    .await
                    .expect(StatusCode::OK);
                files.insert(path.into(), json!(hex::encode(Sha256::digest(&reply.body))));
            }
            let reviews = all_pages(app, &format!("/api/datasets/{id}/reviews"), token).await;
            details.push(json!({"detail": detail, "files": files, "reviews": reviews}));
        }
        s.insert("datasets".into(), json!(datasets));
        s.insert("details".into(), json!(details));

        let orgs = all_pages(app, "/api/orgs", token).await;
        let mut org_views = Vec::new();
        for org in &orgs {
            let id = org["id"].as_str().unwrap();
            let members = app
                .get(&format!("/api/orgs/{id}/members?page_size=100"), token)
                .await;
            let datasets = app
                .get(&format!("/api/orgs/{id}/datasets?page_size=100"), token)
                .await;
            org_views.push(json!({
                "members": [members.status.as_u16(), members.json()],
                "datasets": [datasets.status.as_u16(), datasets.json()],
            }));
        }
        s.insert("orgs".into(), json!(orgs));
        s.insert("org_views".into(), json!(org_views));

        // Listing conversations before messages keeps the unread counts in view.
        let conversations = all_pages(app, "/api/conversations", token).await;
        let mut threads = Vec::new();
        for c in &conversations {
            let id = c["conversation"]["id"].as_str().unwrap();
            threads.push(json!(
                all_pages(app, &format!("/api/conversations/{id}/messages"), token).await
            ));
        }
        s.insert("conversations".into(), json!(conversations));
        s.insert("messages".into(), json!(threads));
        s.insert(
            "notifications".into(),
            json!(all_pages(app, "/api/notifications?unread=false", token).await),
        );
        per_user.insert(user.username.clone(), Value::Object(s));
    }
    Value::Object(per_user)
}

fn count(v: &Value, key: &str) -> usize {
    v.as_object()
        .unwrap()
        .values()
        .map(|u| u[key].as_array().map_or(0, Vec::len))
        .sum()
}

pub async fn populate(app: &TestApp) -> Vec<Session> {
    let alice = app.register("alice").await;
    let bob = app.register("bob").await;
    let carol = app.register("carol").await;
    let dave = app.register("dave").await;
    let lab = app.create_org(&alice.token, "lab").await;
    app.join_org(&bob.token, &lab).await;
    let guild = app.create_org(&carol.token, "guild").await;
    app.join_org(&dave.token, &guild).await;

    let d1 = app
        .create_dataset(
            &alice.token,
            json!({"name": "EEG", "visibility": "public", "tags": ["eeg", "sleep"]}),
            &[("a.csv", b"1,2"), ("sub/raw.bin", &[0u8, 1, 2, 255])],
        )
        .await;
    app.clock.advance_secs(5);
    let d2 = app
        .create_dataset(
            &bob.token,
            json!({"name": "lab notes", "visibility": "org", "org_ids": [lab]}),
            &[("notes.md", b"# notes")],
        )
        .await;
    app.create_dataset(
        &carol.token,
        json!({"name": "private", "visibility": "private"}),
        &[("p.txt", b"mine")],
    )
    .await;
    app.create_dataset(
        &dave.token,
        public_meta("dave data"),
        &[("same.csv", b"1,2")],
    )
    .await;
    app.clock.advance_secs(5);

    app.post(
        &format!("/api/datasets/{d1}/reviews"),
        Some(&bob.token),
        json!({"rating": 4, "comment": "nice"}),
    )
    .await
    .expect(StatusCode::CREATED);
    app.post(
        &format!("/api/datasets/{d1}/reviews"),
        Some(&carol.token),
        json!({"rating": 2}),
    )
    .await
    .expect(StatusCode::CREATED);
    app.post(
        &format!("/api/datasets/{d2}/reviews"),
        Some(&alice.token),
        json!({"rating": 5}),
    )
    .await
    .expect(StatusCode::CREATED);

    let conv = app
        .post(
            "/api/conversations",
            Some(&alice.token),
            json!({"user_id": bob.id}),
        )
        .await
        .expect(StatusCode::OK)
        .json()["id"]
        .as_str()
        .unwrap()
        .to_owned();
    for (who, body) in [
        (&alice, "hello"),
        (&bob, "hi!"),
        (&alice, "about the EEG data"),
    ] {
        app.clock.advance_secs(1);
        app.post(
            &format!("/api/conversations/{conv}/messages"),
            Some(&who.token),
            json!({"body": body}),
        )
        .await
        .expect(StatusCode::CREATED);
    }
    let dconv = app
        .post(
            "/api/conversations",
            Some(&carol.token),
            json!({"user_id": dave.id}),
        )
        .await
        .expect(StatusCode::OK)
        .json()["id"]
        .as_str()
        .unwrap()
        .to_owned();
    app.post(
        &format!("/api/conversations/{dconv}/messages"),
        Some(&dave.token),
        json!({"body": "bye"}),
    )
    .await
    .expect(StatusCode::CREATED);

    // Some notifications read, some not.
    let first = app
        .get("/api/notifications?page_size=1", Some(&alice.token))
        .await
        .json();
    let ids: Vec<Value> = first["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| n["id"].clone())
        .collect();
    app.post(
        "/api/notifications/mark-read",
        Some(&alice.token),
        json!({"ids": ids}),
    )
    .await
    .expect(StatusCode::OK);

    // Dave leaves: his messages survive under a tombstone.
    app.send(Method::DELETE, "/api/users/me", Some(&dave.token), None)
        .await
        .expect(StatusCode::NO_CONTENT);
    vec![alice, bob, carol]
}

pub async fn run() -> String {
    let app = TestApp::new();
    let users = populate(&app).await;

    let mut archive = Vec::new();
    let report = app.hub.backup(&mut archive).unwrap();
    let before = snapshot(&app, &users).await;

    let TestApp {
        dir,
        hub,
        clock,
        router,
    } = app;
    drop(router);
    let hub = Arc::into_inner(hub).expect("no other hub handles");
    drop(hub);
    let data_dir = dir.path().join("data");
    fs::remove_dir_all(&data_dir).unwrap();
    assert!(!data_dir.exists());

    restore(Cursor::new(&archive), &data_dir).unwrap();
    let hub = DataHub::open_with_clock(config(data_dir), clock.clone()).unwrap();
    let app = TestApp::assemble(dir, Arc::new(hub), clock);
    let after = snapshot(&app, &users).await;

    assert!(
        before == after,
        "snapshot differs after restore:\nbefore {before}\nafter  {after}"
    );
    assert!(app.hub.blobs().fsck().unwrap().is_empty());
    format!(
        "{} datasets, {} conversations, {} notifications, {} blobs ({} bytes) identical after wipe+restore",
        count(&before, "datasets"),
        count(&before, "conversations"),
        count(&before, "notifications"),
        report.blobs,
        report.bytes
    )
}
