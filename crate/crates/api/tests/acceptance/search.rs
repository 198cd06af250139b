use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use crate::support::{all_pages, Session, TestApp};

const DATASETS: usize = 1000;
const QUERIES: usize = 200;
const WORDS: &[&str] = &[
    "sleep",
    "EEG",
    "nutrition",
    "Genome",
    "climate",
    "traffic",
    "survey",
    "ocean",
];
const TAGS: &[&str] = &[
    "eeg",
    "food",
    "genomics",
    "climate",
    "open data",
    "raw_2024",
];
const EXTS: &[&str] = &["csv", "CSV", "json", "bin", "tsv", "txt"];

struct Fixture {
    id: String,
    name: String,
    owner: usize,
    tags: BTreeSet<String>,
    paths: Vec<String>,
    vis: &'static str,
    orgs: BTreeSet<usize>,
    created_at: String,
}

#[derive(Debug)]
struct Query {
    viewer: usize,
    name: Option<String>,
    file_type: Option<String>,
    tags: Vec<String>,
    author: Option<String>,
}

fn matches(q: &Query, d: &Fixture, users: &[Session], membership: &[BTreeSet<usize>]) -> bool {
    let visible = match d.vis {
        "public" => true,
        "org" => d.owner == q.viewer || !d.orgs.is_disjoint(&membership[q.viewer]),
        _ => d.owner == q.viewer,
    };
    let name_ok = q
        .name
        .as_ref()
        .is_none_or(|n| d.name.to_lowercase().contains(&n.to_lowercase()));
    let type_ok = q.file_type.as_ref().is_none_or(|ext| {
        let suffix = format!(".{}", ext.trim_start_matches('.').to_lowercase());
        d.paths.iter().any(|p| p.to_lowercase().ends_with(&suffix))
    });
    let tags_ok = q.tags.iter().all(|t| d.tags.contains(&t.to_lowercase()));
    let author_ok = q
        .author
        .as_ref()
        .is_none_or(|a| users[d.owner].username == *a);
    visible && name_ok && type_ok && tags_ok && author_ok
}

fn query_string(q: &Query) -> String {
    let mut params = form_urlencoded::Serializer::new(String::new());
    if let Some(n) = &q.name {
        params.append_pair("name", n);
    }
    if let Some(f) = &q.file_type {
        params.append_pair("file_type", f);
    }
    for t in &q.tags {
        params.append_pair("tag", t);
    }
    if let Some(a) = &q.author {
        params.append_pair("author", a);
    }
    params.finish()
}

fn random_case(rng: &mut StdRng, s: &str) -> String {
    s.chars()
        .map(|c| {
            if rng.gen_bool(0.5) {
                c.to_ascii_uppercase()
            } else {
                c.to_ascii_lowercase()
            }
        })
        .collect()
}

pub async fn run() -> String {
    let app = TestApp::new();
    let mut rng = StdRng::seed_from_u64(0x5eed_0003);
    let mut users = Vec::new();
    for name in ["ana", "ben", "cai", "dee", "eli", "fay"] {
        users.push(app.register(name).await);
    }
    let mut orgs = Vec::new();
    let mut membership = vec![BTreeSet::new(); users.len()];
    for (o, creator) in [(0usize, 0usize), (1, 3), (2, 5)] {
        orgs.push(
            app.create_org(&users[creator].token, &format!("org{o}"))
                .await,
        );
        membership[creator].insert(o);
        for (u, user) in users.iter().enumerate() {
            if u != creator && rng.gen_bool(0.4) {
                app.join_org(&user.token, &orgs[o]).await;
                membership[u].insert(o);
            }
        }
    }

    let mut fixtures = Vec::with_capacity(DATASETS);
    for i in 0..DATASETS {
        // Many datasets share a timestamp so the id tie-break is exercised.
        if rng.gen_bool(0.3) {
            app.clock.advance_secs(1);
        }
        let owner = rng.gen_range(0..users.len());
        let name = format!(
            "{} {} {i}",
            WORDS.choose(&mut rng).unwrap(),
            WORDS.choose(&mut rng).unwrap()
        );
        let tag_count = rng.gen_range(0..=3);
        let tags: BTreeSet<String> = TAGS
            .choose_multiple(&mut rng, tag_count)
            .map(|t| t.to_string())
            .collect();
        let paths: Vec<String> = (0..rng.gen_range(1..=3))
            .map(|k| format!("part{k}.{}", EXTS.choose(&mut rng).unwrap()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let owned: Vec<usize> = membership[owner].iter().copied().collect();
        let (vis, dorgs): (&'static str, BTreeSet<usize>) = match rng.gen_range(0..3) {
            0 => ("public", BTreeSet::new()),
            1 if !owned.is_empty() => {
                let k = rng.gen_range(1..=owned.len());
                ("org", owned.choose_multiple(&mut rng, k).copied().collect())
            }
            _ => ("private", BTreeSet::new()),
        };
        let meta = json!({
            "name": name,
            "visibility": vis,
            "org_ids": dorgs.iter().map(|o| orgs[*o].clone()).collect::<Vec<_>>(),
            "tags": tags.iter().map(|t| random_case(&mut rng, t)).collect::<Vec<_>>(),
        });
        let files: Vec<(&str, &[u8])> = paths
            .iter()
            .map(|p| (p.as_str(), b"x".as_slice()))
            .collect();
        let reply = app.upload(&users[owner].token, &meta, &files).await;
        let body: Value = reply.expect(axum::http::StatusCode::CREATED).json();
        fixtures.push(Fixture {
            id: body["id"].as_str().unwrap().to_owned(),
            name,
            owner,
            tags,
            paths,
            vis,
            orgs: dorgs,
            created_at: body["created_at"].as_str().unwrap().to_owned(),
        });
    }
    let created: HashMap<&str, i64> = fixtures
        .iter()
        .map(|f| {
            let ts = chrono::DateTime::parse_from_rfc3339(&f.created_at).unwrap();
            (f.id.as_str(), ts.timestamp_micros())
        })
        .collect();

    let mut mismatches = Vec::new();
    let mut nonempty = 0;
    for n in 0..QUERIES {
        let tag_count = rng.gen_range(0..=2);
        let q = Query {
            viewer: rng.gen_range(0..users.len()),
            name: rng.gen_bool(0.4).then(|| {
                let word = WORDS.choose(&mut rng).unwrap();
                let start = rng.gen_range(0..word.len() - 1);
                let end = rng.gen_range(start + 1..=word.len());
                random_case(&mut rng, &word[start..end])
            }),
            file_type: rng.gen_bool(0.4).then(|| {
                let ext = EXTS.choose(&mut rng).unwrap();
                if rng.gen_bool(0.2) {
                    format!(".{ext}")
                } else {
                    ext.to_string()
                }
            }),
            tags: TAGS
                .choose_multiple(&mut rng, tag_count)
                .map(|t| random_case(&mut rng, t))
                .collect(),
            author: rng.gen_bool(0.3).then(|| {
                if rng.gen_bool(0.9) {
                    users.choose(&mut rng).unwrap().username.clone()
                } else {
                    "nobody".to_owned()
                }
            }),
        };
        let mut expected: Vec<&Fixture> = fixtures
            .iter()
            .filter(|d| matches(&q, d, &users, &membership))
            .collect();
        expected.sort_by_key(|d| (Reverse(created[d.id.as_str()]), d.id.clone()));
        let expected: Vec<&str> = expected.iter().map(|d| d.id.as_str()).collect();

        let path = format!("/api/datasets?{}", query_string(&q));
        let got = all_pages(&app, &path, Some(&users[q.viewer].token)).await;
        let got: Vec<&str> = got.iter().map(|d| d["id"].as_str().unwrap()).collect();
        if !expected.is_empty() {
            nonempty += 1;
        }
        if got != expected {
            mismatches.push(format!(
                "query {n} {q:?}: expected {} ids, got {}",
                expected.len(),
                got.len()
            ));
        }
    }
    assert!(
        mismatches.is_empty(),
        "{} mismatches, first: {}",
        mismatches.len(),
        mismatches[0]
    );
    assert!(
        nonempty >= QUERIES / 4,
        "only {nonempty} queries had results"
    );
    format!("{QUERIES} queries over {DATASETS} datasets, 0 mismatches, {nonempty} non-empty")
}
