//! Primal-dual hybrid gradient with residual-balancing step sizes.
//!
//! Iteration (extrapolation `theta = 1`):
//!
//! ```text
//! y+ = P_dual(y + sigma K (2 x - x_prev))
//! x+ = P_primal(x - tau (K^T y+ + c))
//! ```
//!
//! Every `check_every` iterations the primal residual
//! `(x_prev - x)/tau - K^T (y_prev - y)` and dual residual
//! `(y_prev - y)/sigma - K (x_prev - x)` are measured; the run stops once
//! their norms fall below `tol * sqrt(n)` for the respective variable count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lifting::{dot_seq, dual_objective, repair_dual, DualVars, LiftedField, Multipliers, SaddleProblem};

pub use crate::prox::project_simplex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptConfig {
    pub enabled: bool,
    pub alpha0: f64,
    pub eta: f64,
    pub delta: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self { enabled: true, alpha0: 0.5, eta: 0.95, delta: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Initial primal step; `None` means `0.95 / |K|`.
    pub tau0: Option<f64>,
    /// Initial dual step; `None` means `0.95 / |K|`.
    pub sigma0: Option<f64>,
    pub adapt: AdaptConfig,
    pub max_iter: usize,
    pub tol: f64,
    pub check_every: usize,
    /// Fixed-order reductions; kernels are per-pixel and already order independent.
    pub deterministic: bool,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tau0: None,
            sigma0: None,
            adapt: AdaptConfig::default(),
            max_iter: 200_000,
            tol: 1e-6,
            check_every: 10,
            deterministic: true,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("solver tolerance must be positive"));
        }
        if self.check_every == 0 {
            return Err(invalid("check_every must be positive"));
        }
        for v in [self.tau0, self.sigma0].into_iter().flatten() {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid("step sizes must be positive"));
            }
        }
        let a = &self.adapt;
        if !(0.0 < a.alpha0 && a.alpha0 < 1.0) || !(0.0 < a.eta && a.eta < 1.0) || !(a.delta > 1.0) {
            return Err(invalid("adaptive parameters need alpha0, eta in (0,1) and delta > 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIter,
}

/// One residual check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProgressRecord {
    pub iter: usize,
    pub primal_res: f64,
    pub dual_res: f64,
    pub tau: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub primal_residual_history: Vec<f64>,
    pub dual_residual_history: Vec<f64>,
    pub check_iterations: Vec<usize>,
    pub primal_threshold: f64,
    pub dual_threshold: f64,
    pub tau: f64,
    pub sigma: f64,
    pub opnorm: f64,
    /// Lagrangian value at the final iterate.
    pub saddle_value: f64,
    /// Dual objective of the repaired final dual point; a lower bound on the
    /// original energy of every vertex-valued function.
    pub dual_bound: f64,
    pub termination: Termination,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: LiftedField,
    pub dual: DualVars,
    pub multipliers: Multipliers,
    pub report: SolveReport,
}

/// Power-iteration estimate of `|K|` (largest singular value).
pub fn estimate_opnorm(problem: &SaddleProblem, iters: usize, seed: u64) -> f64 {
    let lay = problem.layout();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..lay.primal_len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut kx = vec![0.0; lay.dual_len()];
    let mut ktkx = vec![0.0; lay.primal_len()];
    let mut estimate = 0.0;
    for _ in 0..iters {
        let nx = dot_seq(&x, &x).sqrt();
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        problem.apply(&x, &mut kx);
        problem.apply_adjoint(&kx, &mut ktkx);
        estimate = dot_seq(&kx, &kx).sqrt();
        std::mem::swap(&mut x, &mut ktkx);
    }
    estimate
}

/// Residual norms of one PDHG step from `(x_prev, y_prev)` to `(x, y)`.
///
/// `kx_diff = K (x_prev - x)` and `kty_diff = K^T (y_prev - y)`.
pub fn residuals(
    x_prev: &[f64],
    x: &[f64],
    y_prev: &[f64],
    y: &[f64],
    kx_diff: &[f64],
    kty_diff: &[f64],
    tau: f64,
    sigma: f64,
) -> (f64, f64) {
    let primal: f64 = x_prev
        .iter()
        .zip(x)
        .zip(kty_diff)
        .map(|((a, b), k)| {
            let r = (a - b) / tau - k;
            r * r
        })
        .sum();
    let dual: f64 = y_prev
        .iter()
        .zip(y)
        .zip(kx_diff)
        .map(|((a, b), k)| {
            let r = (a - b) / sigma - k;
            r * r
        })
        .sum();
    (primal.sqrt(), dual.sqrt())
}

pub struct Pdhg<'a> {
    problem: &'a SaddleProblem,
    config: SolverConfig,
    progress: Option<Box<dyn FnMut(&ProgressRecord) + 'a>>,
    initial: Option<(Vec<f64>, Vec<f64>)>,
}

impl<'a> Pdhg<'a> {
    pub fn new(problem: &'a SaddleProblem, config: SolverConfig) -> Self {
        Self { problem, config, progress: None, initial: None }
    }

    /// Callback invoked after every residual check.
    pub fn on_progress(mut self, f: impl FnMut(&ProgressRecord) + 'a) -> Self {
        self.progress = Some(Box::new(f));
        self
    }

    /// Warm start from flat primal and dual vectors.
    pub fn warm_start(mut self, x: Vec<f64>, y: Vec<f64>) -> Self {
        self.initial = Some((x, y));
        self
    }

    pub fn solve(mut self) -> Result<Solution> {
        self.config.validate()?;
        let problem = self.problem;
        let cfg = self.config.clone();
        let lay = *problem.layout();
        let (np, nd) = (lay.primal_len(), lay.dual_len());

        let opnorm = estimate_opnorm(problem, 50, cfg.seed);
        let default_step = if opnorm > 0.0 { 0.95 / opnorm } else { 1.0 };
        let mut tau = cfg.tau0.unwrap_or(default_step);
        let mut sigma = cfg.sigma0.unwrap_or(default_step);
        let mut alpha = cfg.adapt.alpha0;

        let c = problem.linear_term();
        let (mut x, mut y) = match self.initial.take() {
            Some((x, y)) if x.len() == np && y.len() == nd => (x, y),
            Some(_) => return Err(Error::ShapeMismatch("warm start vectors have wrong length".into())),
            None => {
                let mut x = vec![0.0; np];
                let [ur, ..] = lay.primal_ranges();
                x[ur].iter_mut().for_each(|v| *v = 1.0 / lay.l as f64);
                (x, vec![0.0; nd])
            }
        };
        problem.project_primal(&mut x);
        problem.project_dual(&mut y);

        let mut kx = vec![0.0; nd];
        problem.apply(&x, &mut kx);
        let mut kx_prev = kx.clone();
        let mut kty = vec![0.0; np];
        problem.apply_adjoint(&y, &mut kty);
        let mut kty_prev = kty.clone();
        let mut x_prev = x.clone();
        let mut y_prev = y.clone();
        let mut kx_diff = vec![0.0; nd];
        let mut kty_diff = vec![0.0; np];

        let primal_threshold = cfg.tol * (np as f64).sqrt();
        let dual_threshold = cfg.tol * (nd as f64).sqrt();
        let mut report = SolveReport {
            iterations: 0,
            primal_residual_history: Vec::new(),
            dual_residual_history: Vec::new(),
            check_iterations: Vec::new(),
            primal_threshold,
            dual_threshold,
            tau,
            sigma,
            opnorm,
            saddle_value: f64::NAN,
            dual_bound: f64::NAN,
            termination: Termination::MaxIter,
        };

        for iter in 1..=cfg.max_iter {
            let check = iter % cfg.check_every == 0 || iter == cfg.max_iter;
            if check {
                x_prev.copy_from_slice(&x);
                y_prev.copy_from_slice(&y);
                kty_prev.copy_from_slice(&kty);
            }
            // dual ascent on the extrapolated primal point
            for ((yv, a), b) in y.iter_mut().zip(&kx).zip(&kx_prev) {
                *yv += sigma * (2.0 * a - b);
            }
            problem.project_dual(&mut y);
            problem.apply_adjoint(&y, &mut kty);
            // primal descent
            for ((xv, k), cv) in x.iter_mut().zip(&kty).zip(&c) {
                *xv -= tau * (k + cv);
            }
            problem.project_primal(&mut x);
            std::mem::swap(&mut kx_prev, &mut kx);
            problem.apply(&x, &mut kx);

            if check {
                for ((d, a), b) in kx_diff.iter_mut().zip(&kx_prev).zip(&kx) {
                    *d = a - b;
                }
                for ((d, a), b) in kty_diff.iter_mut().zip(&kty_prev).zip(&kty) {
                    *d = a - b;
                }
                let (pr, dr) = residuals(&x_prev, &x, &y_prev, &y, &kx_diff, &kty_diff, tau, sigma);
                if !pr.is_finite() || !dr.is_finite() {
                    return Err(Error::Divergence { iteration: iter });
                }
                report.iterations = iter;
                report.primal_residual_history.push(pr);
                report.dual_residual_history.push(dr);
                report.check_iterations.push(iter);
                if let Some(cb) = self.progress.as_mut() {
                    cb(&ProgressRecord { iter, primal_res: pr, dual_res: dr, tau, sigma });
                }
                if pr < primal_threshold && dr < dual_threshold {
                    report.termination = Termination::Converged;
                    break;
                }
                if cfg.adapt.enabled {
                    let delta = cfg.adapt.delta;
                    if pr > delta * dr {
                        tau /= 1.0 - alpha;
                        sigma *= 1.0 - alpha;
                        alpha *= cfg.adapt.eta;
                    } else if pr < dr / delta {
                        tau *= 1.0 - alpha;
                        sigma /= 1.0 - alpha;
                        alpha *= cfg.adapt.eta;
                    }
                }
            }
        }
        report.iterations = report.iterations.max(report.check_iterations.last().copied().unwrap_or(0));
        report.tau = tau;
        report.sigma = sigma;
        report.saddle_value = dot_seq(&kx, &y) + dot_seq(&c, &x);
        if !report.saddle_value.is_finite() {
            return Err(Error::Divergence { iteration: report.iterations });
        }

        let dual = DualVars::from_flat(&lay, &y);
        report.dual_bound = dual_objective(problem, &repair_dual(problem, &dual));
        let (u, multipliers) = problem.split_primal(&x);
        Ok(Solution { u, dual, multipliers, report })
    }
}

/// Runs PDHG with the given configuration.
pub fn pdhg_solve(problem: &SaddleProblem, config: &SolverConfig) -> Result<Solution> {
    Pdhg::new(problem, config.clone()).solve()
}
