use axum::http::{Method, StatusCode};
use datadock_core::DatasetId;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::support::{public_meta, TestApp};

const MULTISETS: usize = 500;
const REVIEWERS: usize = 12;
const TOLERANCE: f64 = 1e-9;

/// Mean rounded half-up to one decimal, by integer arithmetic.
fn rounded_tenths(sum: u64, n: u64) -> f64 {
    let q = 10 * sum / n;
    let r = 10 * sum % n;
    let tenths = if 2 * r >= n { q + 1 } else { q };
    tenths as f64 / 10.0
}

pub async fn run() -> String {
    let app = TestApp::new();
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let owner = app.register("owner").await;
    let mut reviewers = Vec::new();
    for i in 0..REVIEWERS {
        reviewers.push(app.register(&format!("reviewer{i}")).await);
    }
    let invalid: Vec<Value> = vec![
        json!(0),
        json!(6),
        json!(-1),
        json!(-5),
        json!(10),
        json!(i64::MAX),
        json!(3.5),
        json!("4"),
        json!(null),
    ];

    let mut worst = 0.0f64;
    let mut rejected = 0usize;
    let mut attempts = 0usize;
    let mut conflicts = 0usize;
    for m in 0..MULTISETS {
        let id = app
            .create_dataset(
                &owner.token,
                public_meta(&format!("rated {m}")),
                &[("r.txt", b"r")],
            )
            .await;
        let size = rng.gen_range(if m == 0 { 0..=0 } else { 1..=REVIEWERS });
        let ratings: Vec<u64> = (0..size).map(|_| rng.gen_range(1..=5)).collect();
        let chosen: Vec<_> = reviewers.choose_multiple(&mut rng, size).collect();
        let path = format!("/api/datasets/{id}/reviews");

        // Out-of-range and non-integer ratings never land.
        let probe = &reviewers[rng.gen_range(0..REVIEWERS)];
        for bad in &invalid {
            attempts += 1;
            let reply = app
                .post(&path, Some(&probe.token), json!({"rating": bad}))
                .await;
            if reply.status == StatusCode::BAD_REQUEST
                && reply.code().as_deref() == Some("validation_error")
            {
                rejected += 1;
            }
        }

        for (reviewer, rating) in chosen.iter().zip(&ratings) {
            app.post(
                &path,
                Some(&reviewer.token),
                json!({"rating": rating, "comment": "ok"}),
            )
            .await
            .expect(StatusCode::CREATED);
        }
        if let Some(first) = chosen.first() {
            let reply = app
                .post(&path, Some(&first.token), json!({"rating": 3}))
                .await;
            assert_eq!(
                (reply.status, reply.code().as_deref()),
                (StatusCode::CONFLICT, Some("conflict")),
                "duplicate review"
            );
            conflicts += 1;

            let mine = app.get(&path, Some(&first.token)).await.json();
            let review = mine["items"]
                .as_array()
                .unwrap()
                .iter()
                .find(|r| r["author_id"] == json!(first.id))
                .unwrap()["id"]
                .as_str()
                .unwrap()
                .to_owned();
            for bad in &invalid[..6] {
                attempts += 1;
                let reply = app
                    .send(
                        Method::PATCH,
                        &format!("/api/reviews/{review}"),
                        Some(&first.token),
                        Some(json!({"rating": bad})),
                    )
                    .await;
                if reply.status == StatusCode::BAD_REQUEST {
                    rejected += 1;
                }
            }
        }

        let n = ratings.len() as u64;
        let sum: u64 = ratings.iter().sum();
        let dataset_id: DatasetId = id.parse().unwrap();
        let summary = app.hub.rating_summary(dataset_id).unwrap();
        assert_eq!(summary.count(), n);
        let detail = app
            .get(&format!("/api/datasets/{id}"), Some(&owner.token))
            .await
            .json();
        assert_eq!(detail["rating"]["count"], json!(n));
        if n == 0 {
            assert!(summary.raw_mean().is_none());
            assert_eq!(detail["rating"]["average"], Value::Null);
            continue;
        }
        let oracle = ratings.iter().map(|&r| r as f64).sum::<f64>() / n as f64;
        let err = (summary.raw_mean().unwrap() - oracle).abs();
        worst = worst.max(err);
        assert!(err <= TOLERANCE, "multiset {m}: mean off by {err}");
        assert_eq!(
            detail["rating"]["average"],
            json!(rounded_tenths(sum, n)),
            "multiset {m}"
        );
    }
    assert_eq!(
        rejected,
        attempts,
        "{} invalid ratings accepted",
        attempts - rejected
    );
    format!(
        "{MULTISETS} multisets, max error {worst:.1e}, {rejected}/{attempts} invalid rejected, {conflicts} duplicates -> conflict"
    )
}
