//! Randomized invariant suites: weak duality against brute force,
//! certificate tightness, constraint-set equivalence and projection oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::energies::{DataTerm, Regularizer, RegularizerKind};
use crate::error::{invalid, Result};
use crate::labelspace::Triangulation;
use crate::lifting::{check_dual_feasibility, lifted_energy_at, make_certificate, KSetNorm, KSetSpec, LiftedField, SaddleProblem};
use crate::prox;
use crate::solver::{pdhg_solve, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Duality,
    Certificate,
    Kset,
    Projection,
}

impl Suite {
    pub const ALL: [Suite; 4] = [Suite::Duality, Suite::Certificate, Suite::Kset, Suite::Projection];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Duality => "duality",
            Suite::Certificate => "certificate",
            Suite::Kset => "kset",
            Suite::Projection => "projection",
        }
    }
}

/// Deliberate defects for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    /// Simplex projection replaced by clamping to `[0, 1]`.
    Projection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckOptions {
    pub suites: Vec<Suite>,
    /// Random cases per suite.
    pub trials: usize,
    /// Sampled tuples per constraint-set comparison.
    pub kset_samples: usize,
    pub seed: u64,
    pub fault: Option<Fault>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { suites: Suite::ALL.to_vec(), trials: 20, kset_samples: 10_000, seed: 0, fault: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: bool,
    pub cases: usize,
    pub failures: usize,
    /// Largest observed violation of the suite's tolerance-scaled quantity.
    pub worst: f64,
    pub messages: Vec<String>,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self { suite, passed: true, cases: 0, failures: 0, worst: 0.0, messages: Vec::new() }
    }

    fn record(&mut self, ok: bool, value: f64, msg: impl FnOnce() -> String) {
        self.cases += 1;
        self.worst = self.worst.max(value);
        if !ok {
            self.failures += 1;
            self.passed = false;
            if self.messages.len() < 10 {
                self.messages.push(msg());
            }
        }
    }
}

pub fn run_checks(opts: &CheckOptions) -> Result<Vec<SuiteReport>> {
    if opts.trials == 0 || opts.kset_samples == 0 {
        return Err(invalid("trials and kset_samples must be positive"));
    }
    opts.suites.iter().map(|&s| run_suite(s, opts)).collect()
}

pub fn run_suite(suite: Suite, opts: &CheckOptions) -> Result<SuiteReport> {
    if opts.trials == 0 {
        return Err(invalid("trials must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (suite as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    match suite {
        Suite::Duality => duality_suite(opts.trials, &mut rng),
        Suite::Certificate => certificate_suite(opts.trials, &mut rng),
        Suite::Kset => kset_suite(opts.trials, opts.kset_samples, &mut rng),
        Suite::Projection => Ok(projection_suite(opts.trials.max(1) * 25, opts.fault, &mut rng)),
    }
}

/// A random 1D instance: `n` pixels, `l` labels on `[-1, 1]`, `rho` uniform in `[0, 1]`.
pub fn random_line_problem(n: usize, l: usize, weight: f64, rng: &mut impl Rng) -> Result<SaddleProblem> {
    let grid = Grid::line(n)?;
    let tri = Triangulation::interval(-1.0, 1.0, l)?;
    let rho = DataTerm::new(n, l, (0..n * l).map(|_| rng.gen::<f64>()).collect())?;
    SaddleProblem::assemble(grid, tri, rho, Regularizer::squared_euclid(weight))
}

/// Minimum of the original energy over all vertex-valued functions.
pub fn brute_force_minimum(problem: &SaddleProblem) -> Result<f64> {
    let n = problem.grid().len();
    let l = problem.tri().num_labels();
    let s = problem.tri().dim();
    let total = l.checked_pow(n as u32).filter(|&t| t <= 5_000_000).ok_or_else(|| invalid("instance too large"))?;
    let mut best = f64::INFINITY;
    let mut pts = vec![0.0; n * s];
    for code in 0..total {
        let mut c = code;
        for i in 0..n {
            pts[i * s..(i + 1) * s].copy_from_slice(problem.tri().label(c % l));
            c /= l;
        }
        best = best.min(problem.original_energy(&pts)?);
    }
    Ok(best)
}

fn duality_suite(trials: usize, rng: &mut ChaCha8Rng) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Duality);
    let weights = [0.0, 0.1, 1.0];
    for t in 0..trials {
        let weight = weights[t % weights.len()];
        let problem = random_line_problem(5, 4, weight, rng)?;
        let best = brute_force_minimum(&problem)?;
        let sol = pdhg_solve(&problem, &SolverConfig::default())?;
        let saddle = sol.report.saddle_value;
        let bound = sol.report.dual_bound;
        rep.record(saddle <= best + 1e-3, saddle - best, || format!("case {t}: saddle {saddle} above minimum {best}"));
        rep.record(bound <= best + 1e-9, bound - best, || format!("case {t}: certified bound {bound} above minimum {best}"));
    }
    Ok(rep)
}

fn random_instance(rng: &mut ChaCha8Rng) -> Result<SaddleProblem> {
    let (grid, tri) = if rng.gen_bool(0.5) {
        (Grid::line(rng.gen_range(2..8))?, Triangulation::interval(-1.0, 1.0, rng.gen_range(2..7))?)
    } else {
        let rings: &[usize] = if rng.gen_bool(0.5) { &[5] } else { &[6, 10] };
        (Grid::image(rng.gen_range(1..5), rng.gen_range(2..5))?, Triangulation::disk(rng.gen_range(0.5..3.0), rings)?)
    };
    let (n, l) = (grid.len(), tri.num_labels());
    let rho = DataTerm::new(n, l, (0..n * l).map(|_| rng.gen_range(0.0..2.0)).collect())?;
    let kind = [RegularizerKind::SquaredEuclid, RegularizerKind::OneNorm, RegularizerKind::EuclidNorm][rng.gen_range(0..3)];
    let reg = Regularizer::new(kind, rng.gen_range(0.05..2.0))?;
    SaddleProblem::assemble(grid, tri, rho, reg)
}

fn certificate_suite(trials: usize, rng: &mut ChaCha8Rng) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Certificate);
    for t in 0..trials * 5 {
        let problem = random_instance(rng)?;
        let (n, l, s) = (problem.grid().len(), problem.tri().num_labels(), problem.tri().dim());
        let mut pts = Vec::with_capacity(n * s);
        for _ in 0..n {
            pts.extend_from_slice(problem.tri().label(rng.gen_range(0..l)));
        }
        let cert = make_certificate(&problem, &pts)?;
        let feas = check_dual_feasibility(&problem, &cert, 1e-8);
        let u = LiftedField::from_dirac(problem.tri(), &pts)?;
        let lifted = lifted_energy_at(&problem, &u, &cert);
        let orig = problem.original_energy(&pts)?;
        let rel = (lifted - orig).abs() / orig.abs().max(f64::MIN_POSITIVE);
        rep.record(feas.feasible && rel <= 1e-8, rel, || format!("case {t}: feasibility {feas:?}, lifted {lifted} vs {orig}"));
    }
    Ok(rep)
}

/// Random mesh for constraint-set comparisons.
fn random_mesh(rng: &mut ChaCha8Rng) -> Result<Triangulation> {
    match rng.gen_range(0..3) {
        0 => {
            let l = rng.gen_range(3..=10);
            let mut xs: Vec<f64> = (0..l).map(|_| rng.gen_range(-2.0..2.0)).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup_by(|a, b| (*a - *b).abs() < 0.05);
            if xs.len() < 2 {
                xs = vec![-1.0, 1.0];
            }
            let simplices = (0..xs.len() - 1).map(|k| vec![k, k + 1]).collect();
            Triangulation::new(1, xs.into_iter().map(|x| vec![x]).collect(), simplices)
        }
        1 => Triangulation::disk(rng.gen_range(0.5..2.0), &[4]),
        _ => Triangulation::disk(rng.gen_range(0.5..2.0), &[8, 16]),
    }
}

/// Random PL coefficients: half are concave maps `min` of affine pieces with
/// bounded slopes (often members), half are unstructured.
fn random_pl(tri: &Triangulation, rng: &mut ChaCha8Rng, norm: KSetNorm) -> Vec<f64> {
    let s = tri.dim();
    let l = tri.num_labels();
    if rng.gen_bool(0.5) {
        let pieces: Vec<(Vec<f64>, f64)> = (0..rng.gen_range(1..4))
            .map(|_| {
                let mut a: Vec<f64> = (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let scale = rng.gen_range(0.3..1.3) / norm.dual_norm(&a).max(1e-9);
                a.iter_mut().for_each(|v| *v *= scale);
                (a, rng.gen_range(-1.0..1.0))
            })
            .collect();
        (0..l)
            .map(|k| {
                pieces.iter().map(|(a, b)| b + a.iter().zip(tri.label(k)).map(|(x, y)| x * y).sum::<f64>()).fold(f64::INFINITY, f64::min)
            })
            .collect()
    } else {
        (0..l).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }
}

fn kset_suite(trials: usize, samples: usize, rng: &mut ChaCha8Rng) -> Result<SuiteReport> {
    let mut rep = SuiteReport::new(Suite::Kset);
    let mut t = 0;
    while rep.cases < trials * 10 {
        let tri = random_mesh(rng)?;
        let norm = if rng.gen_bool(0.5) { KSetNorm::OneNorm } else { KSetNorm::EuclidNorm };
        let stencil = if rng.gen_bool(0.5) { 2 } else { 4 };
        let spec = KSetSpec::new(&tri, norm, stencil)?;
        let f = random_pl(&tri, rng, norm);
        let exact = spec.membership(&f, 1e-9);
        // violations below 1e-3 are too small for the sampler to find reliably
        if !exact.member && exact.worst_concavity.max(exact.worst_gradient - 1.0) < 1e-3 {
            continue;
        }
        let sampled = spec.sampled_check(&f, samples, rng.gen())?;
        let count_ok = exact.constraints <= tri.num_faces();
        rep.record(sampled == exact.member && count_ok, f64::from(u8::from(sampled != exact.member)), || {
            format!("case {t}: finite test {} vs sampled {sampled} ({} labels, {norm:?}, m = {stencil})", exact.member, tri.num_labels())
        });
        t += 1;
    }
    Ok(rep)
}

/// Minimizes a convex function of two parameters by a coarse grid followed by
/// shrinking local grids. Infeasible points should return infinity.
pub fn grid_refine_2d(f: impl Fn(f64, f64) -> f64, lo: [f64; 2], hi: [f64; 2]) -> [f64; 2] {
    const COARSE: usize = 40;
    let mut best = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let mut best_val = f(best[0], best[1]);
    for a in 0..=COARSE {
        for b in 0..=COARSE {
            let p = [
                lo[0] + (hi[0] - lo[0]) * a as f64 / COARSE as f64,
                lo[1] + (hi[1] - lo[1]) * b as f64 / COARSE as f64,
            ];
            let v = f(p[0], p[1]);
            if v < best_val {
                best = p;
                best_val = v;
            }
        }
    }
    let mut h = [(hi[0] - lo[0]) / COARSE as f64, (hi[1] - lo[1]) / COARSE as f64];
    for _ in 0..60 {
        let center = best;
        for a in -3i32..=3 {
            for b in -3i32..=3 {
                let p = [center[0] + a as f64 * h[0] / 3.0, center[1] + b as f64 * h[1] / 3.0];
                let v = f(p[0], p[1]);
                if v < best_val {
                    best = p;
                    best_val = v;
                }
            }
        }
        if best == center {
            h = [h[0] * 0.5, h[1] * 0.5];
        }
    }
    best
}

/// One-parameter version of [`grid_refine_2d`].
pub fn grid_refine_1d(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    const COARSE: usize = 400;
    let mut best = lo;
    let mut best_val = f(lo);
    for a in 1..=COARSE {
        let x = lo + (hi - lo) * a as f64 / COARSE as f64;
        let v = f(x);
        if v < best_val {
            best = x;
            best_val = v;
        }
    }
    let mut h = (hi - lo) / COARSE as f64;
    for _ in 0..60 {
        for x in [best - h, best + h] {
            let v = f(x);
            if v < best_val {
                best = x;
                best_val = v;
            }
        }
        h *= 0.5;
    }
    best
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((x - y).abs()))
}

fn projection_suite(points: usize, fault: Option<Fault>, rng: &mut ChaCha8Rng) -> SuiteReport {
    let mut rep = SuiteReport::new(Suite::Projection);
    let simplex = |v: &[f64]| -> Vec<f64> {
        match fault {
            Some(Fault::Projection) => v.iter().map(|x| x.clamp(0.0, 1.0)).collect(),
            None => prox::project_simplex(v),
        }
    };
    for t in 0..points {
        // simplex in R^3
        let v: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let p = simplex(&v);
        let o = grid_refine_2d(
            |a, b| if a < 0.0 || b < 0.0 || a + b > 1.0 { f64::INFINITY } else { dist2(&[a, b, 1.0 - a - b], &v) },
            [0.0, 0.0],
            [1.0, 1.0],
        );
        let err = max_diff(&p, &[o[0], o[1], 1.0 - o[0] - o[1]]);
        let idem = max_diff(&simplex(&p), &p);
        rep.record(err <= 1e-4 && idem <= 1e-9, err, || format!("simplex {t}: {v:?} -> {p:?}, oracle error {err:.2e}"));

        // box of half-width b in R^2
        let bound = rng.gen_range(0.1..2.0);
        let g: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut p = g.clone();
        prox::project_box(&mut p, bound);
        let o = grid_refine_2d(
            |a, b| if a.abs() > bound || b.abs() > bound { f64::INFINITY } else { dist2(&[a, b], &g) },
            [-bound, -bound],
            [bound, bound],
        );
        let mut again = p.clone();
        prox::project_box(&mut again, bound);
        let err = max_diff(&p, &o);
        rep.record(err <= 1e-4 && max_diff(&again, &p) <= 1e-9, err, || format!("box {t}: oracle error {err:.2e}"));

        // ball of radius r in R^2
        let r = rng.gen_range(0.1..2.0);
        let mut p = g.clone();
        prox::project_ball(&mut p, r);
        let o = if g[0].hypot(g[1]) <= r {
            g.clone()
        } else {
            let th = grid_refine_1d(|th| dist2(&[r * th.cos(), r * th.sin()], &g), -std::f64::consts::PI, std::f64::consts::PI);
            vec![r * th.cos(), r * th.sin()]
        };
        let mut again = p.clone();
        prox::project_ball(&mut again, r);
        let err = max_diff(&p, &o);
        rep.record(err <= 1e-4 && max_diff(&again, &p) <= 1e-9, err, || format!("ball {t}: oracle error {err:.2e}"));

        // epigraph of a |g|^2 in R^2 x R
        let a = rng.gen_range(0.1..2.0);
        let tt = rng.gen_range(-2.0..2.0);
        let mut pg = g.clone();
        let mut pt = tt;
        prox::project_parabola_epigraph(&mut pg, &mut pt, a);
        let oracle = if tt >= a * (g[0] * g[0] + g[1] * g[1]) {
            vec![g[0], g[1], tt]
        } else {
            let span = g[0].abs().max(g[1].abs()) + 1.0;
            let o = grid_refine_2d(
                |x, y| dist2(&[x, y, a * (x * x + y * y)], &[g[0], g[1], tt]),
                [-span, -span],
                [span, span],
            );
            vec![o[0], o[1], a * (o[0] * o[0] + o[1] * o[1])]
        };
        let got = vec![pg[0], pg[1], pt];
        let (mut ag, mut at) = (pg.clone(), pt);
        prox::project_parabola_epigraph(&mut ag, &mut at, a);
        let err = max_diff(&got, &oracle);
        let idem = max_diff(&[ag[0], ag[1], at], &got);
        rep.record(err <= 1e-4 && idem <= 1e-9, err, || format!("epigraph {t}: oracle error {err:.2e}, drift {idem:.2e}"));
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_trials_rejected() {
        let opts = CheckOptions { trials: 0, ..CheckOptions::default() };
        assert!(run_checks(&opts).is_err());
    }

    #[test]
    fn projection_fault_is_caught() {
        let opts = CheckOptions { trials: 2, fault: Some(Fault::Projection), ..CheckOptions::default() };
        assert!(!run_suite(Suite::Projection, &opts).unwrap().passed);
        let clean = CheckOptions { trials: 2, ..CheckOptions::default() };
        assert!(run_suite(Suite::Projection, &clean).unwrap().passed);
    }

    #[test]
    fn brute_force_matches_hand_count() {
        let grid = Grid::line(2).unwrap();
        let tri = Triangulation::interval(0.0, 1.0, 2).unwrap();
        let rho = DataTerm::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let p = SaddleProblem::assemble(grid, tri, rho, Regularizer::squared_euclid(0.5)).unwrap();
        // u = (1, 0): data 0, laplacian (-1, 1), regularizer 2 * 0.25
        assert!((brute_force_minimum(&p).unwrap() - 0.5).abs() < 1e-12);
    }
}
