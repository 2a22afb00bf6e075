//! Lifted solve of the absolute-value toy problem on a 20-point line.

use laplift::energies::{sample_absdiff_squared, unit_interval_positions};
use laplift::rounding::{extract_modes, round_mean, round_threshold};
use laplift::{pdhg_solve, Grid, Regularizer, SaddleProblem, SolverConfig, Triangulation};

fn main() -> laplift::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let grid = Grid::line(n)?;
    let tri = Triangulation::interval(-1.0, 1.0, n)?;
    let rho = sample_absdiff_squared(&grid, &tri)?;
    let problem = SaddleProblem::assemble(grid, tri, rho, Regularizer::squared_euclid(1.0))?;
    let start = std::time::Instant::now();
    let sol = pdhg_solve(&problem, &SolverConfig::default())?;
    println!(
        "{} iterations in {:.1}s, saddle {:.6}, bound {:.6}",
        sol.report.iterations,
        start.elapsed().as_secs_f64(),
        sol.report.saddle_value,
        sol.report.dual_bound
    );
    let tri = problem.tri();
    let mean = round_mean(tri, &sol.u)?;
    let thresh = round_threshold(tri, &sol.u, 0.5)?;
    let modes = extract_modes(tri, &sol.u, 0.05, 4)?;
    for (i, x) in unit_interval_positions(n).into_iter().enumerate() {
        let m: Vec<String> = modes[i].iter().map(|m| format!("{:+.3}@{:.2}", m.position[0], m.weight)).collect();
        println!("x={x:+.3} mean={:+.3} thr={:+.3} modes=[{}]", mean.values[i], thresh.values[i], m.join(" "));
    }
    Ok(())
}
