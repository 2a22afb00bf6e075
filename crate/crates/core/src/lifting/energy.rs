use rayon::prelude::*;
use serde::Serialize;

use super::{DualVars, Layout, LiftedField, SaddleProblem};
use crate::domain::Grid;
use crate::energies::{DataTerm, Regularizer};
use crate::error::{Error, Result};
use crate::labelspace::{dot, Triangulation};

/// Discrete original energy `sum_i rho^(X^i, u_i) + eta((Lap u)_i)` of an
/// `N x s` label-space function, with `rho^` the PL interpolant of the samples.
pub fn original_energy(
    grid: &Grid,
    tri: &Triangulation,
    rho: &DataTerm,
    reg: &Regularizer,
    points: &[f64],
) -> Result<f64> {
    let s = tri.dim();
    if points.len() != grid.len() * s {
        return Err(Error::ShapeMismatch(format!("{} values for {} points of dim {s}", points.len(), grid.len())));
    }
    let lap = grid.laplacian_apply(points, s)?;
    let mut total = 0.0;
    for i in 0..grid.len() {
        total += tri.evaluate_pl(rho.row(i), &points[i * s..(i + 1) * s])?;
        total += reg.value(&lap[i * s..(i + 1) * s]);
    }
    Ok(total)
}

impl SaddleProblem {
    pub fn original_energy(&self, points: &[f64]) -> Result<f64> {
        original_energy(&self.grid, &self.tri, &self.rho, &self.reg, points)
    }
}

/// `(Lap_x p)[i, k] + q[i, k]`, the integrand tested against `u`.
fn tested_integrand(problem: &SaddleProblem, dual: &DualVars) -> Vec<f64> {
    let l = problem.layout.l;
    let mut lp = vec![0.0; dual.p.len()];
    problem.grid.laplacian_into(&dual.p, l, &mut lp);
    lp.iter_mut().zip(&dual.q).for_each(|(a, b)| *a += b);
    lp
}

/// `sum_{i,k} u[i,k] ((Lap_x p)[i,k] + q[i,k])`.
pub fn lifted_energy_at(problem: &SaddleProblem, u: &LiftedField, dual: &DualVars) -> f64 {
    let w = tested_integrand(problem, dual);
    super::dot_seq(&u.values, &w)
}

/// `sum_i min_k ((Lap_x p)[i,k] + q[i,k])`: the primal minimum of the
/// Lagrangian in `u` for a fixed dual point. It lower-bounds the lifted
/// energy of every field once the dual point is feasible.
pub fn dual_objective(problem: &SaddleProblem, dual: &DualVars) -> f64 {
    let l = problem.layout.l;
    tested_integrand(problem, dual).chunks(l).map(|row| row.iter().copied().fold(f64::INFINITY, f64::min)).sum()
}

/// Dual point attaining the lower bound at `points` for separable integrands:
/// `p(z) = <z, w_i>`, `q(z) = rho(z) - eta*(w_i)` with `w_i = grad eta((Lap u)_i)`.
pub fn make_certificate(problem: &SaddleProblem, points: &[f64]) -> Result<DualVars> {
    let Layout { n, l, m, s, .. } = problem.layout;
    if points.len() != n * s {
        return Err(Error::ShapeMismatch(format!("{} values for {n} points of dim {s}", points.len())));
    }
    let lap = problem.grid.laplacian_apply(points, s)?;
    let mut dual = DualVars::zeros(&problem.layout);
    for i in 0..n {
        let w = problem.reg.gradient(&lap[i * s..(i + 1) * s]);
        let conj = problem.reg.conjugate(&w);
        for k in 0..l {
            dual.p[i * l + k] = dot(problem.tri.label(k), &w);
            dual.q[i * l + k] = problem.rho.get(i, k) - conj;
        }
        for j in 0..m {
            dual.g[(i * m + j) * s..(i * m + j + 1) * s].copy_from_slice(&w);
            dual.t[i * m + j] = conj;
        }
    }
    Ok(dual)
}

/// Worst violation of each family of dual constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    pub feasible: bool,
    /// `|g[i,j] - grad_j p[i]|_inf`
    pub gradient_consistency: f64,
    /// `<g[i,j2] - g[i,j1], n>` across interior faces
    pub concavity: f64,
    /// `q[i,k] + t[i,j] - rho[i,k]` for vertices `k` of `j`
    pub fenchel: f64,
    /// distance-like violation of `eta*(g) <= t`
    pub epigraph: f64,
}

pub fn check_dual_feasibility(problem: &SaddleProblem, dual: &DualVars, tol: f64) -> FeasibilityReport {
    let Layout { n, l, m, s, .. } = problem.layout;
    let per_pixel: Vec<[f64; 4]> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = [0.0f64; 4];
            let mut grads = vec![0.0; m * s];
            problem.gradients_of(&dual.p[i * l..(i + 1) * l], &mut grads);
            let g = &dual.g[i * m * s..(i + 1) * m * s];
            for (a, b) in grads.iter().zip(g) {
                worst[0] = worst[0].max((a - b).abs());
            }
            for f in &problem.faces {
                let v: f64 = (0..s).map(|d| (g[f.j2 * s + d] - g[f.j1 * s + d]) * f.normal[d]).sum();
                worst[1] = worst[1].max(v);
            }
            for j in 0..m {
                let tij = dual.t[i * m + j];
                for &k in problem.tri.simplex(j) {
                    worst[2] = worst[2].max(dual.q[i * l + k] + tij - problem.rho.get(i, k));
                }
                worst[3] = worst[3].max(problem.reg.epigraph_violation(&g[j * s..(j + 1) * s], tij));
            }
            worst
        })
        .collect();
    let mut worst = [0.0f64; 4];
    for w in &per_pixel {
        for c in 0..4 {
            worst[c] = worst[c].max(w[c]);
        }
    }
    FeasibilityReport {
        feasible: worst.iter().all(|&v| v <= tol),
        gradient_consistency: worst[0],
        concavity: worst[1],
        fenchel: worst[2],
        epigraph: worst[3],
    }
}

/// Feasibility repair for arbitrary dual iterates.
///
/// Projects `(g, t)` onto the conjugate epigraph and lowers `q` so that
/// `lifted_energy_at(u, repaired) <= original_energy(u)` for every
/// vertex-valued `u`. The concavity and gradient-consistency defects of `p`
/// are absorbed into `q` through the excess
/// `e[i,k,j] = max_l p[i,l] - p[i,k] - <g[i,j], Z^l - Z^k>`, charged once per
/// stencil neighbor of pixel `i`.
pub fn repair_dual(problem: &SaddleProblem, dual: &DualVars) -> DualVars {
    let Layout { l, m, s, .. } = problem.layout;
    let tri = &problem.tri;
    let mut out = dual.clone();
    out.g.par_chunks_mut(s).zip(out.t.par_iter_mut()).for_each(|(g, t)| problem.reg.epigraph_project(g, t));
    let (g_all, t_all) = (&out.g, &out.t);
    out.q.par_chunks_mut(l).enumerate().for_each(|(i, q)| {
        let p = &dual.p[i * l..(i + 1) * l];
        let neighbors = problem.grid.neighbors(i).len() as f64;
        for k in 0..l {
            let zk = tri.label(k);
            let mut best = f64::NEG_INFINITY;
            for &(j, _) in &problem.incidence[k] {
                let g = &g_all[(i * m + j) * s..(i * m + j + 1) * s];
                let excess = (0..l)
                    .map(|o| {
                        let step: f64 = tri.label(o).iter().zip(zk).zip(g).map(|((a, b), gd)| (a - b) * gd).sum();
                        p[o] - p[k] - step
                    })
                    .fold(0.0f64, f64::max);
                let cand = problem.rho.get(i, k) - t_all[i * m + j] - neighbors * excess;
                best = best.max(cand);
            }
            q[k] = q[k].min(best);
        }
    });
    out
}
