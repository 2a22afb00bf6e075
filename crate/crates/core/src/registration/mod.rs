//! Curvature-regularized image registration on top of the lifted solver.

mod image;

use std::io::Write;
use std::path::Path;

use serde::Serialize;

pub use image::{
    endpoint_error, load_pgm, save_pgm, synth_rotation, warp, Deformation, EndpointError, Image,
};

use crate::domain::Grid;
use crate::energies::{sample_registration, Regularizer};
use crate::error::{invalid, Result};
use crate::labelspace::Triangulation;
use crate::lifting::SaddleProblem;
use crate::rounding::round_mean;
use crate::solver::{Pdhg, ProgressRecord, SolveReport, SolverConfig};

/// Smooth, non-symmetric grayscale pattern in `[0, 1]`: a few anisotropic
/// Gaussian blobs over a low-frequency wave.
pub fn test_pattern(width: usize, height: usize) -> Image {
    // (cx, cy, sx, sy, amplitude) in units of the image size
    const BLOBS: [(f64, f64, f64, f64, f64); 5] = [
        (0.30, 0.35, 0.10, 0.16, 0.55),
        (0.68, 0.30, 0.14, 0.08, -0.45),
        (0.55, 0.70, 0.09, 0.09, 0.50),
        (0.25, 0.72, 0.12, 0.07, -0.35),
        (0.50, 0.50, 0.05, 0.11, 0.30),
    ];
    let (w, h) = (width as f64, height as f64);
    Image::from_fn(width, height, |x, y| {
        let (u, v) = (x as f64 / w, y as f64 / h);
        let mut val = 0.5 + 0.08 * (5.0 * u + 2.0).sin() * (4.0 * v - 1.0).cos();
        for (cx, cy, sx, sy, a) in BLOBS {
            val += a * (-0.5 * (((u - cx) / sx).powi(2) + ((v - cy) / sy).powi(2))).exp();
        }
        val.clamp(0.0, 1.0)
    })
    .expect("nonempty pattern")
}

/// Inputs of one registration run.
#[derive(Debug, Clone)]
pub struct RegistrationSetup {
    pub reference: Image,
    pub template: Image,
    /// Displacement labels in pixels, `(dx, dy)`.
    pub labels: Triangulation,
    pub weight: f64,
    pub solver: SolverConfig,
    pub truth: Option<Deformation>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegistrationSummary {
    pub ssd_before: f64,
    pub ssd_after: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub saddle_value: f64,
    pub dual_bound: f64,
    pub mean_displacement: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epe_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epe_max: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult {
    pub deformation: Deformation,
    pub warped: Image,
    pub summary: RegistrationSummary,
    pub report: SolveReport,
    reference: Image,
    template: Image,
}

/// Sample the data term, assemble and solve the lifted problem, round by the
/// mean and warp the template.
pub fn run_registration(setup: &RegistrationSetup, progress: Option<&mut dyn FnMut(&ProgressRecord)>) -> Result<RegistrationResult> {
    if setup.labels.dim() != 2 {
        return Err(invalid("registration needs a 2D displacement label space"));
    }
    let (w, h) = (setup.reference.width(), setup.reference.height());
    let grid = Grid::image(h, w)?;
    let rho = sample_registration(&setup.reference, &setup.template, &grid, &setup.labels)?;
    let reg = Regularizer::squared_euclid(setup.weight);
    let problem = SaddleProblem::assemble(grid, setup.labels.clone(), rho, reg)?;
    let mut pdhg = Pdhg::new(&problem, setup.solver.clone());
    if let Some(cb) = progress {
        pdhg = pdhg.on_progress(cb);
    }
    let solution = pdhg.solve()?;
    let mean = round_mean(problem.tri(), &solution.u)?;
    let deformation =
        Deformation { width: w, height: h, values: (0..w * h).map(|i| [mean.point(i)[0], mean.point(i)[1]]).collect() };
    let warped = warp(&setup.template, &deformation)?;
    let epe = setup.truth.as_ref().map(|t| endpoint_error(&deformation, t, label_radius(&setup.labels))).transpose()?;
    let report = solution.report;
    let summary = RegistrationSummary {
        ssd_before: setup.reference.ssd(&setup.template)?,
        ssd_after: setup.reference.ssd(&warped)?,
        iterations: report.iterations,
        primal_residual: report.primal_residual_history.last().copied().unwrap_or(f64::NAN),
        dual_residual: report.dual_residual_history.last().copied().unwrap_or(f64::NAN),
        saddle_value: report.saddle_value,
        dual_bound: report.dual_bound,
        mean_displacement: (0..w * h).map(|i| deformation.magnitude(i)).sum::<f64>() / (w * h) as f64,
        epe_mean: epe.map(|e| e.mean),
        epe_max: epe.map(|e| e.max),
    };
    Ok(RegistrationResult {
        deformation,
        warped,
        summary,
        report,
        reference: setup.reference.clone(),
        template: setup.template.clone(),
    })
}

/// Largest label distance from the origin.
pub fn label_radius(tri: &Triangulation) -> f64 {
    (0..tri.num_labels()).map(|k| tri.label(k).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max)
}

/// `|a - b|` rescaled so its maximum is 1.
fn difference_image(a: &Image, b: &Image) -> Result<Image> {
    let d = a.abs_diff(b)?;
    let peak = d.values().iter().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { 1.0 / peak } else { 0.0 };
    Image::from_values(d.width(), d.height(), d.values().iter().map(|v| v * scale).collect())
}

impl RegistrationResult {
    /// Writes `deformation.csv`, `warped.pgm`, `difference_before.pgm`,
    /// `difference_after.pgm` and `summary.json` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut csv = std::io::BufWriter::new(std::fs::File::create(dir.join("deformation.csv"))?);
        writeln!(csv, "x,y,dx,dy")?;
        for (i, d) in self.deformation.values.iter().enumerate() {
            writeln!(csv, "{},{},{},{}", i % self.deformation.width, i / self.deformation.width, d[0], d[1])?;
        }
        csv.flush()?;
        save_pgm(&self.warped, dir.join("warped.pgm"))?;
        save_pgm(&difference_image(&self.reference, &self.template)?, dir.join("difference_before.pgm"))?;
        save_pgm(&difference_image(&self.reference, &self.warped)?, dir.join("difference_after.pgm"))?;
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary)?)?;
        Ok(())
    }
}
