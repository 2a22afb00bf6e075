//! Solves a lifted problem for a data term supplied as a binary array file,
//! then compares the saddle value with the certified lower bound.

use laplift::arrayio;
use laplift::rounding::round_mean;
use laplift::solver::{Pdhg, SolverConfig};
use laplift::{DataTerm, Grid, Regularizer, RegularizerKind, SaddleProblem, Triangulation};

fn main() -> laplift::Result<()> {
    let (rows, cols) = (8usize, 6usize);
    let tri = Triangulation::interval(0.0, 1.0, cols)?;
    // two competing targets: 0.2 on the left half, 0.8 on the right
    let values: Vec<f64> = (0..rows)
        .flat_map(|i| {
            let target = if i < rows / 2 { 0.2 } else { 0.8 };
            let tri = &tri;
            (0..cols).map(move |k| (tri.label(k)[0] - target).powi(2))
        })
        .collect();
    let dir = std::env::temp_dir().join("laplift-custom-data");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("rho.bin");
    arrayio::write(&path, rows, cols, &values)?;

    let (r, c, v) = arrayio::read(&path)?;
    let rho = DataTerm::new(r, c, v)?;
    let reg = Regularizer::new(RegularizerKind::EuclidNorm, 0.05)?;
    let problem = SaddleProblem::assemble(Grid::line(rows)?, tri, rho, reg)?;
    let sol = Pdhg::new(&problem, SolverConfig::default())
        .on_progress(|p| {
            if p.iter % 500 == 0 {
                println!("iter {:>5}: primal {:.2e} dual {:.2e} tau {:.3} sigma {:.3}", p.iter, p.primal_res, p.dual_res, p.tau, p.sigma);
            }
        })
        .solve()?;
    let mean = round_mean(problem.tri(), &sol.u)?;
    println!("{:?} after {} iterations", sol.report.termination, sol.report.iterations);
    println!("saddle value {:.6}, certified bound {:.6}", sol.report.saddle_value, sol.report.dual_bound);
    println!("energy of mean rounding {:.6}", problem.original_energy(&mean.values)?);
    println!("mean rounding {:?}", mean.values.iter().map(|v| (v * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    Ok(())
}
