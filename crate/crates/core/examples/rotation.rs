//! Registers a synthetic image against a rotated copy using a 25-vertex
//! displacement disk and reports the endpoint error against the true field.
//!
//! Arguments (all optional): image size, regularizer weight, angle in degrees.

use laplift::registration::{run_registration, synth_rotation, test_pattern, Deformation, RegistrationSetup};
use laplift::{SolverConfig, Triangulation};

fn main() -> laplift::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let size = args.first().copied().unwrap_or(48.0) as usize;
    let weight = args.get(1).copied().unwrap_or(0.2);
    let degrees = args.get(2).copied().unwrap_or(40.0);
    let template = test_pattern(size, size);
    let setup = RegistrationSetup {
        reference: synth_rotation(&template, degrees),
        template,
        labels: Triangulation::disk(12.0, &[8, 16])?,
        weight,
        solver: SolverConfig { max_iter: 20_000, ..SolverConfig::default() },
        truth: Some(Deformation::rotation(size, size, degrees)),
    };
    let start = std::time::Instant::now();
    let mut log = |r: &laplift::solver::ProgressRecord| {
        if r.iter % 1000 == 0 {
            eprintln!("iter {} primal {:.2e} dual {:.2e}", r.iter, r.primal_res, r.dual_res);
        }
    };
    let res = run_registration(&setup, Some(&mut log))?;
    println!("{:.1}s {}", start.elapsed().as_secs_f64(), serde_json::to_string_pretty(&res.summary).unwrap());
    Ok(())
}
