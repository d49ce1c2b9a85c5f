//! Acceptance suite: every criterion at full size with its stated
//! tolerance. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any fails.
//!
//! `ACCEPTANCE_SCALE=quick` shrinks the ensembles for a fast smoke run.

use std::process::ExitCode;

use cluster_gas::experiments::{Scale, CRITERIA};

const SEED: u64 = 20240601;

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from the harness are accepted and ignored
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let scale = match std::env::var("ACCEPTANCE_SCALE").as_deref() {
        Ok("quick") => Scale::Quick,
        _ => Scale::Full,
    };
    let mut failed = Vec::new();
    for (k, f) in CRITERIA.iter().enumerate() {
        match f(SEED, scale) {
            Ok(rep) => {
                println!("{}", rep.line());
                for n in &rep.notes {
                    println!("    {n}");
                }
                if !rep.passed {
                    failed.push(rep.id);
                }
            }
            Err(e) => {
                println!("FAIL criterion {:>2}: pipeline error: {e}", k + 1);
                failed.push(k + 1);
            }
        }
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed.len(), CRITERIA.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
