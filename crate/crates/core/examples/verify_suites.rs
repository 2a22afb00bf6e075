//! Runs the randomized invariant suites and prints a one-line verdict each.

use laplift::verify::{run_checks, CheckOptions, Fault};

fn main() -> laplift::Result<()> {
    let inject = std::env::args().any(|a| a == "--inject-fault");
    let opts = CheckOptions { trials: 5, kset_samples: 5000, fault: inject.then_some(Fault::Projection), ..CheckOptions::default() };
    for r in run_checks(&opts)? {
        println!(
            "{:<12} {} ({} cases, {} failures, worst {:.1e})",
            r.suite.name(),
            if r.passed { "ok" } else { "FAILED" },
            r.cases,
            r.failures,
            r.worst
        );
        for m in &r.messages {
            println!("    {m}");
        }
    }
    Ok(())
}
