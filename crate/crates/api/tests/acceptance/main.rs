//! Acceptance gate. Each criterion runs in isolation against an in-process
//! server and reports one PASS/FAIL line. Exits non-zero if any fails.

mod backup;
mod concurrency;
mod fanout;
mod ratings;
mod round_trip;
mod search;
mod support;
mod visibility;

use std::future::Future;
use std::pin::Pin;
use std::process::ExitCode;
use std::time::Instant;

type Criterion = fn() -> Pin<Box<dyn Future<Output = String> + Send>>;

fn criteria() -> Vec<(&'static str, Criterion)> {
    vec![
        ("round_trip_integrity", || Box::pin(round_trip::run())),
        ("visibility_matrix", || Box::pin(visibility::run())),
        ("search_oracle", || Box::pin(search::run())),
        ("auth_suite", || Box::pin(auth::run())),
        ("ratings", || Box::pin(ratings::run())),
        ("notification_fanout", || Box::pin(fanout::run())),
        ("concurrent_dedup", || Box::pin(concurrency::run())),
        ("api_contract", || Box::pin(contract::run())),
        ("backup_restore", || Box::pin(backup::run())),
    ]
}

fn panic_text(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_owned()
    } else {
        "panicked".to_owned()
    }
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap();

    let mut failed = 0;
    let mut ran = 0;
    for (name, criterion) in criteria() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let outcome = runtime.block_on(async { tokio::spawn(criterion()).await });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(summary) => println!("PASS {name} ({summary}; {secs:.1}s)"),
            Err(err) => {
                failed += 1;
                let why = if err.is_panic() {
                    panic_text(err.into_panic())
                } else {
                    err.to_string()
                };
                println!("FAIL {name}: {}", why.lines().next().unwrap_or(""));
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
