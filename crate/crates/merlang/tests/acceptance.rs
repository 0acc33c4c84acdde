//! Runs every acceptance criterion at the default configuration and prints
//! one line per criterion. Exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use merlang::config::ExperimentConfig;
use merlang::validate::{run_check, CheckName};

struct Criterion {
    check: CheckName,
    title: &'static str,
    time_limit: Option<Duration>,
}

const fn criterion(check: CheckName, title: &'static str, seconds: Option<u64>) -> Criterion {
    let time_limit = match seconds {
        Some(s) => Some(Duration::from_secs(s)),
        None => None,
    };
    Criterion { check, title, time_limit }
}

const CRITERIA: [Criterion; 9] = [
    criterion(CheckName::SpecialFunctions, "special-function identities", Some(1)),
    criterion(CheckName::LtRoundtrip, "Laplace-transform round trip", Some(300)),
    criterion(CheckName::GoverningSystem, "governing system in the Laplace domain", None),
    criterion(CheckName::FractionalReduction, "reduction to a single order", None),
    criterion(CheckName::ClassicalLimit, "classical limit against the Markov chain", Some(60)),
    criterion(CheckName::MonteCarlo, "Monte Carlo against the series", Some(600)),
    criterion(CheckName::Samplers, "event-time samplers", None),
    criterion(CheckName::BusyPeriod, "busy-period distribution", None),
    criterion(CheckName::StructuralInvariants, "structural invariants", None),
];

fn main() -> ExitCode {
    let cfg = ExperimentConfig::default();
    let mut failures = 0;
    for (i, c) in CRITERIA.iter().enumerate() {
        let start = Instant::now();
        let outcome = run_check(c.check, &cfg).expect("default configuration is valid");
        let elapsed = start.elapsed();
        let in_time = c.time_limit.is_none_or(|limit| elapsed < limit);
        let passed = outcome.passed && in_time;
        if !passed {
            failures += 1;
        }
        let severity = |d: f64, tol: f64| if d == 0.0 { 0.0 } else { d / tol };
        let worst = outcome.comparisons.iter().max_by(|a, b| {
            severity(a.max_deviation, a.tolerance).total_cmp(&severity(b.max_deviation, b.tolerance))
        });
        let detail = match (&outcome.oracle_error, worst) {
            (Some(e), _) => format!("oracle error: {e}"),
            (None, Some(w)) => format!("worst {} = {:.3e} (tolerance {:.1e})", w.quantity, w.max_deviation, w.tolerance),
            (None, None) => "no comparisons".to_string(),
        };
        let timing = match c.time_limit {
            Some(limit) => format!("{:.2}s of {}s", elapsed.as_secs_f64(), limit.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        println!(
            "{} criterion {} [{}] {}: {}; {}",
            if passed { "PASS" } else { "FAIL" },
            i + 1,
            c.check,
            c.title,
            detail,
            timing
        );
    }
    println!("acceptance: {} of {} criteria passed", CRITERIA.len() - failures, CRITERIA.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
