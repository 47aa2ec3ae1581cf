//! Runs every acceptance criterion and prints one PASS or FAIL line each.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use faircompass_acceptance::CRITERIA;

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    payload
        .downcast_ref::<String>()
        .cloned()
        .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
        .unwrap_or_else(|| "panicked".into())
}

fn main() -> ExitCode {
    let mut failures = 0;
    for criterion in &CRITERIA {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(criterion.check))
            .unwrap_or_else(|p| Err(format!("panic: {}", panic_message(p))));
        let elapsed = start.elapsed();
        let outcome = match (outcome, criterion.limit) {
            (Ok(detail), Some(limit)) if elapsed > limit => {
                Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}"))
            }
            (outcome, _) => outcome,
        };
        let limit = criterion
            .limit
            .map(|l| format!(", limit {l:?}"))
            .unwrap_or_default();
        match outcome {
            Ok(detail) => println!("PASS  {}: {detail} ({elapsed:.2?}{limit})", criterion.name),
            Err(reason) => {
                failures += 1;
                println!("FAIL  {}: {reason} ({elapsed:.2?}{limit})", criterion.name);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        CRITERIA.len() - failures,
        CRITERIA.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
