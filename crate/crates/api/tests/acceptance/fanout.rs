use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::json;

use crate::support::{all_pages, TestApp};

const GRAPHS: usize = 100;
const USERS: usize = 10;

pub async fn run() -> String {
    let app = TestApp::new();
    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let mut users = Vec::new();
    for i in 0..USERS {
        users.push(app.register(&format!("user{i}")).await);
    }

    // dataset id -> expected recipient indices
    let mut expected: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for g in 0..GRAPHS {
        let uploader = rng.gen_range(0..USERS);
        let org_count = rng.gen_range(1..=4);
        let mut members: Vec<BTreeSet<usize>> = Vec::new();
        let mut org_ids = Vec::new();
        for k in 0..org_count {
            let creator = rng.gen_range(0..USERS);
            let org = app
                .create_org(&users[creator].token, &format!("g{g} org{k}"))
                .await;
            let mut set = BTreeSet::from([creator]);
            for (u, user) in users.iter().enumerate() {
                if u != creator && rng.gen_bool(0.35) {
                    app.join_org(&user.token, &org).await;
                    set.insert(u);
                }
            }
            members.push(set);
            org_ids.push(org);
        }
        // The uploader must belong to every org it binds the dataset to.
        let bound: Vec<usize> = {
            let mut all: Vec<usize> = (0..org_count).collect();
            all.shuffle(&mut rng);
            all.truncate(rng.gen_range(1..=org_count));
            all
        };
        for &k in &bound {
            if members[k].insert(uploader) {
                app.join_org(&users[uploader].token, &org_ids[k]).await;
            }
        }
        let meta = json!({
            "name": format!("graph {g}"),
            "visibility": "org",
            "org_ids": bound.iter().map(|&k| org_ids[k].clone()).collect::<Vec<_>>(),
        });
        let id = app
            .create_dataset(&users[uploader].token, meta, &[("x.bin", b"x")])
            .await;

        let mut oracle: BTreeSet<usize> = bound
            .iter()
            .flat_map(|&k| members[k].iter().copied())
            .collect();
        oracle.remove(&uploader);
        expected.insert(id, oracle);
    }

    // dataset id -> recipient index -> notification count
    let mut observed: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    for (u, user) in users.iter().enumerate() {
        for n in all_pages(&app, "/api/notifications?unread=false", Some(&user.token)).await {
            assert_eq!(n["recipient_id"], json!(user.id));
            if n["kind"] != "dataset_in_org" {
                continue;
            }
            let dataset = n["subject_ids"]["dataset_id"].as_str().unwrap().to_owned();
            *observed.entry(dataset).or_default().entry(u).or_default() += 1;
        }
    }

    let mut exact = 0;
    let mut deliveries = 0;
    for (id, oracle) in &expected {
        let counts = observed.remove(id).unwrap_or_default();
        let got: BTreeSet<usize> = counts.keys().copied().collect();
        assert_eq!(&got, oracle, "recipients for dataset {id}");
        assert!(
            counts.values().all(|&c| c == 1),
            "duplicate notification for dataset {id}: {counts:?}"
        );
        deliveries += got.len();
        exact += 1;
    }
    assert!(observed.is_empty(), "notifications for unknown datasets");
    format!("{exact}/{GRAPHS} graphs exact, {deliveries} deliveries")
}
