//! Task runners behind the `laplift` binary.
//!
//! Each runner reads a [`RunConfig`], writes its artifacts below the
//! configured output directory and returns an [`Outcome`]. The binary maps
//! errors and outcomes to exit codes with [`exit_code`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::arrayio;
use crate::config::{
    DataSpec, LabelSpec, RunConfig, Task, DEFAULT_REGISTRATION_RADIUS, DEFAULT_REGISTRATION_WEIGHT,
};
use crate::domain::Grid;
use crate::energies::{sample_absdiff_squared, sample_registration, DataTerm, Regularizer};
use crate::error::{invalid, Error, Result};
use crate::lifting::SaddleProblem;
use crate::registration::{
    load_pgm, run_registration, save_pgm, synth_rotation, test_pattern, Deformation, Image, RegistrationSetup,
};
use crate::rounding::{extract_modes, round_mean, round_threshold, Mode};
use crate::solver::{Pdhg, ProgressRecord, Solution, SolveReport, Termination};
use crate::verify::{run_checks, SuiteReport};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub max_iter: Option<usize>,
    pub deterministic: bool,
    pub log_progress: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(n) = self.max_iter {
            cfg.solver.max_iter = n;
        }
        if self.deterministic {
            cfg.solver.deterministic = true;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Success { summary: PathBuf },
    /// Named suites failed.
    InvariantFailure { summary: PathBuf, failed: Vec<String> },
}

pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Success { .. }) => 0,
        Ok(Outcome::InvariantFailure { .. }) => EXIT_INVARIANT,
        Err(Error::Divergence { .. }) => EXIT_DIVERGENCE,
        Err(_) => EXIT_CONFIG,
    }
}

/// Runs the configured task with overrides applied.
pub fn run(mut cfg: RunConfig, overrides: &Overrides) -> Result<Outcome> {
    overrides.apply(&mut cfg);
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output)?;
    let mut log = match &overrides.log_progress {
        Some(p) => Some(ProgressLog::create(&cfg.output, p)?),
        None => None,
    };
    let outcome = match cfg.task {
        Task::Toy1d => cmd_toy1d(&cfg, log.as_mut()),
        Task::LiftSolve => cmd_lift_solve(&cfg, log.as_mut()),
        Task::Register => cmd_register(&cfg, log.as_mut()),
        Task::Check => cmd_check(&cfg),
    };
    if let Some(l) = log {
        l.finish()?;
    }
    outcome
}

/// JSON-lines sink for solver progress records.
pub struct ProgressLog {
    out: BufWriter<File>,
    error: Option<std::io::Error>,
}

impl ProgressLog {
    /// Relative paths resolve inside `dir`; absolute ones must already lie there.
    pub fn create(dir: &Path, path: &Path) -> Result<Self> {
        let full = if path.is_absolute() { path.to_path_buf() } else { dir.join(path) };
        if !full.starts_with(dir) {
            return Err(invalid(format!("progress log {} is outside the output directory", full.display())));
        }
        if let Some(parent) = full.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(Self { out: BufWriter::new(File::create(full)?), error: None })
    }

    fn record(&mut self, r: &ProgressRecord) {
        if self.error.is_none() {
            let line = serde_json::to_string(r).expect("plain record");
            if let Err(e) = writeln!(self.out, "{line}") {
                self.error = Some(e);
            }
        }
    }

    fn finish(mut self) -> Result<()> {
        if let Some(e) = self.error.take() {
            return Err(e.into());
        }
        self.out.flush()?;
        Ok(())
    }
}

fn solve(problem: &SaddleProblem, cfg: &RunConfig, log: Option<&mut ProgressLog>) -> Result<Solution> {
    let mut pdhg = Pdhg::new(problem, cfg.solver_config());
    if let Some(l) = log {
        pdhg = pdhg.on_progress(move |r| l.record(r));
    }
    pdhg.solve()
}

#[derive(Debug, Serialize)]
struct SolveSummary<'a> {
    task: Task,
    pixels: usize,
    labels: usize,
    iterations: usize,
    termination: Termination,
    primal_residual: f64,
    dual_residual: f64,
    primal_threshold: f64,
    dual_threshold: f64,
    saddle_value: f64,
    dual_bound: f64,
    opnorm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rounded_energy: Option<f64>,
    artifacts: &'a [&'a str],
}

fn solve_summary<'a>(task: Task, problem: &SaddleProblem, r: &SolveReport, energy: Option<f64>, artifacts: &'a [&'a str]) -> SolveSummary<'a> {
    SolveSummary {
        task,
        pixels: problem.grid().len(),
        labels: problem.tri().num_labels(),
        iterations: r.iterations,
        termination: r.termination,
        primal_residual: r.primal_residual_history.last().copied().unwrap_or(f64::NAN),
        dual_residual: r.dual_residual_history.last().copied().unwrap_or(f64::NAN),
        primal_threshold: r.primal_threshold,
        dual_threshold: r.dual_threshold,
        saddle_value: r.saddle_value,
        dual_bound: r.dual_bound,
        opnorm: r.opnorm,
        rounded_energy: energy,
        artifacts,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

#[derive(Serialize)]
struct ModeRow<'a> {
    pixel: usize,
    modes: Vec<ModeEntry<'a>>,
}

#[derive(Serialize)]
struct ModeEntry<'a> {
    position: &'a [f64],
    weight: f64,
}

fn write_modes(path: &Path, modes: &[Vec<Mode>]) -> Result<()> {
    let rows: Vec<ModeRow> = modes
        .iter()
        .enumerate()
        .map(|(pixel, ms)| ModeRow {
            pixel,
            modes: ms.iter().map(|m| ModeEntry { position: &m.position, weight: m.weight }).collect(),
        })
        .collect();
    write_json(path, &rows)
}

/// Absolute-value toy problem: 1D grid and labels on `[-1, 1]`.
pub fn cmd_toy1d(cfg: &RunConfig, log: Option<&mut ProgressLog>) -> Result<Outcome> {
    let grid = cfg.grid()?.unwrap_or(Grid::line(20)?);
    let tri = cfg.labels_or(LabelSpec::Interval { a: -1.0, b: 1.0, count: 20 })?;
    if grid.dims() != 1 || tri.dim() != 1 {
        return Err(invalid("toy1d needs a 1D grid and 1D labels"));
    }
    let rho = match &cfg.data {
        None | Some(DataSpec::AbsDiffSquared) => sample_absdiff_squared(&grid, &tri)?,
        Some(_) => return Err(invalid("toy1d uses the abs_diff_squared data term")),
    };
    let problem = SaddleProblem::assemble(grid, tri, rho, cfg.regularizer_or(1.0))?;
    let sol = solve(&problem, cfg, log)?;
    let out = &cfg.output;
    let tri = problem.tri();
    let shape = problem.grid().shape().to_vec();
    arrayio::write(out.join("lifted.bin"), sol.u.rows, sol.u.cols, &sol.u.values)?;
    let mean = round_mean(tri, &sol.u)?;
    mean.write_csv(&shape, out.join("mean.csv"))?;
    round_threshold(tri, &sol.u, cfg.rounding.threshold)?.write_csv(&shape, out.join("threshold.csv"))?;
    write_modes(&out.join("modes.json"), &extract_modes(tri, &sol.u, cfg.rounding.mass_tol, cfg.rounding.max_modes)?)?;
    let energy = problem.original_energy(&mean.values)?;
    let artifacts = ["lifted.bin", "mean.csv", "threshold.csv", "modes.json"];
    let summary = out.join("summary.json");
    write_json(&summary, &solve_summary(cfg.task, &problem, &sol.report, Some(energy), &artifacts))?;
    Ok(Outcome::Success { summary })
}

/// Generic solve from a grid, labels, data term and regularizer.
pub fn cmd_lift_solve(cfg: &RunConfig, log: Option<&mut ProgressLog>) -> Result<Outcome> {
    let grid = cfg.grid()?.ok_or_else(|| invalid("lift-solve needs a `grid` section"))?;
    let tri = cfg.labels.as_ref().ok_or_else(|| invalid("lift-solve needs a `labels` section"))?.build()?;
    let rho = match cfg.data.as_ref().ok_or_else(|| invalid("lift-solve needs a `data` section"))? {
        DataSpec::AbsDiffSquared => sample_absdiff_squared(&grid, &tri)?,
        DataSpec::Array { path } => {
            let (rows, cols, values) = arrayio::read(path)?;
            DataTerm::new(rows, cols, values)?
        }
        DataSpec::Registration { .. } => {
            let (reference, template, _) = registration_images(cfg)?;
            sample_registration(&reference, &template, &grid, &tri)?
        }
    };
    let problem = SaddleProblem::assemble(grid, tri, rho, cfg.regularizer_or(1.0))?;
    let sol = solve(&problem, cfg, log)?;
    let out = &cfg.output;
    arrayio::write(out.join("lifted.bin"), sol.u.rows, sol.u.cols, &sol.u.values)?;
    let mean = round_mean(problem.tri(), &sol.u)?;
    mean.write_csv(problem.grid().shape(), out.join("mean.csv"))?;
    let energy = problem.original_energy(&mean.values)?;
    let artifacts = ["lifted.bin", "mean.csv"];
    let summary = out.join("summary.json");
    write_json(&summary, &solve_summary(cfg.task, &problem, &sol.report, Some(energy), &artifacts))?;
    Ok(Outcome::Success { summary })
}

/// Reference, template and optional ground truth named by the data section.
fn registration_images(cfg: &RunConfig) -> Result<(Image, Image, Option<Deformation>)> {
    match &cfg.data {
        Some(DataSpec::Registration { reference: Some(r), template: Some(t), synthetic: None }) => {
            Ok((load_pgm(r)?, load_pgm(t)?, None))
        }
        Some(DataSpec::Registration { reference: None, template: None, synthetic: Some(s) }) => {
            if s.size == 0 {
                return Err(invalid("synthetic image size must be positive"));
            }
            let template = test_pattern(s.size, s.size);
            let reference = synth_rotation(&template, s.degrees);
            Ok((reference, template, Some(Deformation::rotation(s.size, s.size, s.degrees))))
        }
        Some(DataSpec::Registration { .. }) => {
            Err(invalid("registration data needs either `reference` and `template` paths or `synthetic`"))
        }
        _ => Err(invalid("register needs a `data` section of kind `registration`")),
    }
}

pub fn cmd_register(cfg: &RunConfig, log: Option<&mut ProgressLog>) -> Result<Outcome> {
    let (reference, template, truth) = registration_images(cfg)?;
    if let Some(grid) = cfg.grid()? {
        if grid.shape() != [reference.height(), reference.width()] {
            return Err(invalid("grid shape must match the image size"));
        }
    }
    let labels = cfg.labels_or(LabelSpec::Disk { radius: DEFAULT_REGISTRATION_RADIUS, rings: vec![8, 16] })?;
    let reg: Regularizer = cfg.regularizer_or(DEFAULT_REGISTRATION_WEIGHT);
    if reg.kind != crate::energies::RegularizerKind::SquaredEuclid {
        return Err(invalid("registration uses the squared Euclidean regularizer"));
    }
    let out = &cfg.output;
    if truth.is_some() {
        save_pgm(&reference, out.join("reference.pgm"))?;
        save_pgm(&template, out.join("template.pgm"))?;
    }
    let setup = RegistrationSetup { reference, template, labels, weight: reg.weight, solver: cfg.solver_config(), truth };
    let result = match log {
        Some(l) => {
            let mut cb = |r: &ProgressRecord| l.record(r);
            run_registration(&setup, Some(&mut cb))?
        }
        None => run_registration(&setup, None)?,
    };
    result.write_artifacts(out)?;
    Ok(Outcome::Success { summary: out.join("summary.json") })
}

#[derive(Serialize)]
struct CheckReport<'a> {
    passed: bool,
    suites: &'a [SuiteReport],
}

pub fn cmd_check(cfg: &RunConfig) -> Result<Outcome> {
    let mut opts = cfg.check.clone();
    opts.seed ^= cfg.seed;
    let reports = run_checks(&opts)?;
    let failed: Vec<String> = reports.iter().filter(|r| !r.passed).map(|r| r.suite.name().to_string()).collect();
    let summary = cfg.output.join("check.json");
    write_json(&summary, &CheckReport { passed: failed.is_empty(), suites: &reports })?;
    if failed.is_empty() {
        Ok(Outcome::Success { summary })
    } else {
        Ok(Outcome::InvariantFailure { summary, failed })
    }
}

