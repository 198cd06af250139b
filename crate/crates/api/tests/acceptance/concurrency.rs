use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::support::{multipart, public_meta, TestApp};

const UPLOADS: usize = 16;
const SIZE: usize = 10 * 1024 * 1024;

fn files_under(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for shard in fs::read_dir(dir).unwrap() {
        let shard = shard.unwrap().path();
        for blob in fs::read_dir(&shard).unwrap() {
            out.push(blob.unwrap().file_name().to_string_lossy().into_owned());
        }
    }
    out
}

pub async fn run() -> String {
    let app = Arc::new(TestApp::new());
    let mut users = Vec::new();
    for i in 0..4 {
        users.push(app.register(&format!("uploader{i}")).await);
    }
    let mut content = vec![0u8; SIZE];
    StdRng::seed_from_u64(0x5eed_0007).fill_bytes(&mut content);
    let content = Arc::new(content);
    let digest = hex::encode(Sha256::digest(content.as_slice()));

    let mut tasks = Vec::new();
    for i in 0..UPLOADS {
        let app = app.clone();
        let content = content.clone();
        let token = users[i % users.len()].token.clone();
        tasks.push(tokio::spawn(async move {
            let meta = public_meta(&format!("copy {i}"));
            let (content_type, body) = multipart(Some(&meta), &[("same.bin", content.as_slice())]);
            let req = Request::builder()
                .method(Method::POST)
                .uri("/api/datasets")
                .header(header::AUTHORIZATION, format!("Token {token}"))
                .header(header::CONTENT_TYPE, content_type)
                .body(Body::from(body))
                .unwrap();
            app.call(req).await
        }));
    }
    let mut ok = 0;
    for task in tasks {
        let reply = task.await.unwrap();
        assert_eq!(
            reply.status,
            StatusCode::CREATED,
            "{}",
            String::from_utf8_lossy(&reply.body)
        );
        let body = reply.json();
        assert_eq!(body["entries"][0]["blob_digest"], digest.as_str());
        ok += 1;
    }

    let on_disk = files_under(&app.data_dir().join("blobs"));
    assert_eq!(on_disk, vec![digest.clone()], "blob files on disk");
    let listed = app.hub.blobs().list().unwrap();
    assert_eq!(listed.len(), 1);
    assert_eq!(listed[0].digest.as_str(), digest);
    let bad = app.hub.blobs().fsck().unwrap();
    assert!(bad.is_empty(), "fsck found {bad:?}");
    format!("{ok}/{UPLOADS} uploads succeeded, 1 blob stored, fsck clean")
}
