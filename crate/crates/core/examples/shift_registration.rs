//! Registers a pattern against a copy shifted by two pixels, writing the PGM,
//! CSV and JSON artifacts into a directory given on the command line.

use std::path::PathBuf;

use laplift::registration::{run_registration, test_pattern, warp, Deformation, RegistrationSetup};
use laplift::{SolverConfig, Triangulation};

fn main() -> laplift::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("laplift-shift"));
    let size = 24;
    let reference = test_pattern(size, size);
    let template = warp(&reference, &Deformation::constant(size, size, [-2.0, 0.0]))?;
    let setup = RegistrationSetup {
        reference,
        template,
        labels: Triangulation::disk(3.0, &[8, 16])?,
        weight: 0.05,
        solver: SolverConfig { max_iter: 8000, tol: 1e-5, ..SolverConfig::default() },
        truth: Some(Deformation::constant(size, size, [2.0, 0.0])),
    };
    let result = run_registration(&setup, None)?;
    result.write_artifacts(&out)?;
    println!("{}", serde_json::to_string_pretty(&result.summary).expect("plain data"));
    println!("artifacts in {}", out.display());
    Ok(())
}
