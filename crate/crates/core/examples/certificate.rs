//! Builds the tight dual certificate of a vertex-valued function and checks
//! that it is feasible and reproduces the original energy.

use laplift::lifting::{check_dual_feasibility, dual_objective, lifted_energy_at, make_certificate, LiftedField};
use laplift::{DataTerm, Grid, Regularizer, SaddleProblem, Triangulation};

fn main() -> laplift::Result<()> {
    let grid = Grid::line(3)?;
    let tri = Triangulation::interval(0.0, 1.0, 2)?;
    let rho = DataTerm::new(3, 2, vec![0.0, 1.0, 1.0, 0.0, 0.0, 1.0])?;
    let problem = SaddleProblem::assemble(grid, tri, rho, Regularizer::squared_euclid(1.0))?;

    let u = [0.0, 1.0, 0.0];
    let cert = make_certificate(&problem, &u)?;
    let report = check_dual_feasibility(&problem, &cert, 1e-8);
    let lifted = lifted_energy_at(&problem, &LiftedField::from_dirac(problem.tri(), &u)?, &cert);
    println!("original energy {}", problem.original_energy(&u)?);
    println!("lifted energy   {lifted}");
    println!("dual objective  {}", dual_objective(&problem, &cert));
    println!("feasibility     {}", serde_json::to_string(&report).expect("plain data"));
    Ok(())
}
