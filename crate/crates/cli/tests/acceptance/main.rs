//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `SKINN_ACCEPT=4,7` runs a subset. The process exits non-zero when any
//! selected criterion fails.

mod common;
mod hedging;
mod inference;
mod kernels;
mod pipeline;
mod portfolio;
mod statistics;
mod training;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::Outcome;

type Check = fn() -> Result<Outcome, common::BoxError>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: Check,
}

fn criteria() -> Vec<Criterion> {
    let min = |m: u64| Some(Duration::from_secs(60 * m));
    vec![
        Criterion { id: 1, name: "pricing-kernel oracles", budget: min(2), run: kernels::oracles },
        Criterion { id: 2, name: "gradient suite", budget: min(1), run: kernels::gradients },
        Criterion { id: 3, name: "reductions", budget: None, run: kernels::reductions },
        Criterion { id: 4, name: "SKINN recovery", budget: min(5), run: training::recovery },
        Criterion { id: 5, name: "lambda* benchmark", budget: None, run: training::lambda_star },
        Criterion { id: 6, name: "blend property", budget: None, run: training::blend },
        Criterion { id: 7, name: "inference", budget: min(10), run: inference::coverage },
        Criterion { id: 8, name: "hedging", budget: None, run: hedging::hedge_ratios },
        Criterion { id: 9, name: "statistical tests", budget: None, run: statistics::tests },
        Criterion { id: 10, name: "regime shift", budget: None, run: training::regime_shift },
        Criterion { id: 11, name: "MOPA", budget: None, run: kernels::mopa },
        Criterion { id: 12, name: "mean-variance and deciles", budget: None, run: portfolio::meanvar_and_deciles },
        Criterion { id: 13, name: "end-to-end determinism", budget: None, run: pipeline::determinism },
    ]
}

fn selected() -> Option<Vec<usize>> {
    let v = std::env::var("SKINN_ACCEPT").ok()?;
    Some(v.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

fn main() -> ExitCode {
    let only = selected();
    let mut failed = 0;
    for c in criteria() {
        if only.as_ref().is_some_and(|o| !o.contains(&c.id)) {
            continue;
        }
        let start = Instant::now();
        let result = (c.run)();
        let took = start.elapsed();
        let (mut pass, mut detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if let Some(b) = c.budget {
            if took > b {
                pass = false;
                detail.push_str(&format!("; over the {}s budget", b.as_secs()));
            }
        }
        if !pass {
            failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} {:>2} {}: {detail} [{:.1}s]", c.id, c.name, took.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
