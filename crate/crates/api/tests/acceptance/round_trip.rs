use std::collections::BTreeMap;
use std::io::{Cursor, Read};
use std::time::{Duration, Instant};

use axum::http::{header, StatusCode};
use rand::rngs::StdRng;
use rand::{Rng, RngCore, SeedableRng};

use crate::support::{public_meta, TestApp};

const FILES: usize = 100;
const MAX_SIZE: usize = 1024 * 1024;
const BUDGET: Duration = Duration::from_secs(60);

pub async fn run() -> String {
    let app = TestApp::new();
    let alice = app.register("alice").await;
    let mut rng = StdRng::seed_from_u64(0x5eed_0001);

    let mut originals = BTreeMap::new();
    for i in 0..FILES {
        let size = if i == 0 {
            0
        } else {
            rng.gen_range(0..=MAX_SIZE)
        };
        let mut bytes = vec![0u8; size];
        rng.fill_bytes(&mut bytes);
        let path = match i % 3 {
            0 => format!("file{i:03}.bin"),
            1 => format!("sub{}/file{i:03}.dat", i % 7),
            _ => format!("deep/er/file{i:03}.raw"),
        };
        originals.insert(path, bytes);
    }
    let total: usize = originals.values().map(Vec::len).sum();

    let started = Instant::now();
    let files: Vec<(&str, &[u8])> = originals
        .iter()
        .map(|(p, b)| (p.as_str(), b.as_slice()))
        .collect();
    let id = app
        .create_dataset(&alice.token, public_meta("round trip"), &files)
        .await;
    let reply = app
        .get(&format!("/api/datasets/{id}/archive"), Some(&alice.token))
        .await
        .expect(StatusCode::OK);
    assert_eq!(reply.headers[header::CONTENT_TYPE], "application/zip");
    assert_eq!(
        reply.headers[header::CONTENT_DISPOSITION],
        "attachment; filename=\"round trip.zip\""
    );

    let mut archive = zip::ZipArchive::new(Cursor::new(reply.body.to_vec())).unwrap();
    let mut extracted = BTreeMap::new();
    for i in 0..archive.len() {
        let mut entry = archive.by_index(i).unwrap();
        let mut bytes = Vec::new();
        entry.read_to_end(&mut bytes).unwrap();
        assert!(
            extracted.insert(entry.name().to_owned(), bytes).is_none(),
            "duplicate archive entry {}",
            entry.name()
        );
    }
    let elapsed = started.elapsed();

    assert_eq!(
        extracted.keys().collect::<Vec<_>>(),
        originals.keys().collect::<Vec<_>>(),
        "archive entry names differ from uploaded paths"
    );
    let identical = originals
        .iter()
        .filter(|(path, bytes)| extracted[*path] == **bytes)
        .count();
    assert_eq!(
        identical, FILES,
        "only {identical}/{FILES} files byte-identical"
    );
    assert!(elapsed < BUDGET, "round trip took {elapsed:?}");
    format!(
        "{identical}/{FILES} files identical, {:.1} MiB, upload+download {:.1}s",
        total as f64 / (1024.0 * 1024.0),
        elapsed.as_secs_f64()
    )
}
