//! JSON run configuration shared by the command-line tool and the examples.
//!
//! Every section except `task` is optional; missing sections take the
//! defaults of the chosen task. Unknown keys are rejected.
//!
//! ```json
//! {
//!   "task": "toy1d",
//!   "grid": { "shape": [20] },
//!   "labels": { "type": "interval", "a": -1.0, "b": 1.0, "count": 20 },
//!   "data": { "kind": "abs_diff_squared" },
//!   "regularizer": { "kind": "squared_euclid", "weight": 1.0 },
//!   "solver": { "max_iter": 200000, "tol": 1e-6 },
//!   "output": "out/toy1d",
//!   "seed": 0
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::energies::{Regularizer, RegularizerKind};
use crate::error::{invalid, Error, Result};
use crate::labelspace::{Triangulation, TriangulationJson};
use crate::solver::SolverConfig;
use crate::verify::CheckOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Toy1d,
    Register,
    LiftSolve,
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LabelSpec {
    Interval { a: f64, b: f64, count: usize },
    Disk { radius: f64, rings: Vec<usize> },
    /// Explicit vertices and simplices, inline or from a JSON file.
    Mesh {
        #[serde(default)]
        path: Option<PathBuf>,
        #[serde(default)]
        mesh: Option<TriangulationJson>,
    },
}

impl LabelSpec {
    pub fn build(&self) -> Result<Triangulation> {
        match self {
            LabelSpec::Interval { a, b, count } => Triangulation::interval(*a, *b, *count),
            LabelSpec::Disk { radius, rings } => Triangulation::disk(*radius, rings),
            LabelSpec::Mesh { path: Some(p), mesh: None } => {
                let text = std::fs::read_to_string(p)?;
                let json: TriangulationJson =
                    serde_json::from_str(&text).map_err(|e| Error::Format { path: p.clone(), reason: e.to_string() })?;
                Triangulation::from_json(&json)
            }
            LabelSpec::Mesh { path: None, mesh: Some(m) } => Triangulation::from_json(m),
            LabelSpec::Mesh { .. } => Err(invalid("mesh labels need exactly one of `path` and `mesh`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub size: usize,
    pub degrees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// `(|x| - |z|)^2` with the grid spread over `[-1, 1]`.
    AbsDiffSquared,
    /// Precomputed `N x L` samples in the binary array format.
    Array { path: PathBuf },
    /// `1/2 (R(x) - T(x + z))^2` from image files or a synthetic rotation.
    Registration {
        #[serde(default)]
        reference: Option<PathBuf>,
        #[serde(default)]
        template: Option<PathBuf>,
        #[serde(default)]
        synthetic: Option<SyntheticSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoundingSpec {
    pub threshold: f64,
    pub mass_tol: f64,
    pub max_modes: usize,
}

impl Default for RoundingSpec {
    fn default() -> Self {
        Self { threshold: 0.5, mass_tol: 0.05, max_modes: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub labels: Option<LabelSpec>,
    #[serde(default)]
    pub data: Option<DataSpec>,
    #[serde(default)]
    pub regularizer: Option<Regularizer>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub rounding: RoundingSpec,
    #[serde(default)]
    pub check: CheckOptions,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// Registration defaults: label disk of radius 12 px and regularizer weight 0.05.
pub const DEFAULT_REGISTRATION_RADIUS: f64 = 12.0;
pub const DEFAULT_REGISTRATION_WEIGHT: f64 = 0.05;

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default configuration of a task.
    pub fn for_task(task: Task) -> Self {
        Self {
            task,
            grid: None,
            labels: None,
            data: None,
            regularizer: None,
            solver: SolverConfig::default(),
            rounding: RoundingSpec::default(),
            check: CheckOptions::default(),
            output: default_output(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if let Some(r) = &self.regularizer {
            Regularizer::new(r.kind, r.weight)?;
        }
        if !(0.0..1.0).contains(&self.rounding.threshold) {
            return Err(invalid("rounding.threshold must lie in [0, 1)"));
        }
        if !(self.rounding.mass_tol > 0.0 && self.rounding.mass_tol < 1.0) || self.rounding.max_modes == 0 {
            return Err(invalid("rounding.mass_tol must lie in (0, 1) and max_modes be positive"));
        }
        if self.task == Task::Check && (self.check.trials == 0 || self.check.kset_samples == 0) {
            return Err(invalid("check.trials and check.kset_samples must be positive"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Option<Grid>> {
        self.grid.as_ref().map(|g| Grid::new(&g.shape)).transpose()
    }

    pub fn labels_or(&self, fallback: LabelSpec) -> Result<Triangulation> {
        self.labels.as_ref().unwrap_or(&fallback).build()
    }

    pub fn regularizer_or(&self, weight: f64) -> Regularizer {
        self.regularizer.unwrap_or(Regularizer { kind: RegularizerKind::SquaredEuclid, weight })
    }

    /// Solver settings with the top-level seed applied.
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { seed: self.seed, ..self.solver.clone() }
    }
}
