//! Runs the randomized invariant suite and prints one line per check.
//!
//! `cargo run --release --example verify_suite -- 42 1,2,3`

use adapted_mech::verify::{run_suite, DEFAULT_SEED};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(DEFAULT_SEED);
    let dims: Vec<usize> = args
        .next()
        .map(|s| s.split(',').filter_map(|d| d.trim().parse().ok()).collect())
        .unwrap_or_else(|| vec![1, 2, 3]);

    let report = run_suite(seed, &dims, true);
    for r in &report {
        let verdict = match r.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "info",
        };
        let tol = r.tolerance.map(|t| format!("{t:.0e}")).unwrap_or_else(|| "-".into());
        println!(
            "{verdict:4}  {:42} n={}  samples={:3}  max_error={:.3e}  tol={tol}  {}",
            r.name,
            r.n,
            r.samples,
            r.max_error,
            r.notes.as_deref().unwrap_or("")
        );
    }
    let failed = report.iter().filter(|r| r.failed()).count();
    println!("{failed} failing check(s)");
}
