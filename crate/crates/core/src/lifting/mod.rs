//! The discrete lifted problem.
//!
//! Primal variables are the lifted field `u` (one probability vector over the
//! labels per grid point) and the nonnegative multipliers `lambda`, `mu` and
//! free multipliers `nu` that enforce the dual constraints. Dual variables are
//! `p`, `q` (label coefficients per grid point), per-simplex gradients `g` and
//! epigraph heights `t`. The Lagrangian
//!
//! ```text
//! B = sum u[i,k] ((Lap p)[i,k] + q[i,k])
//!   - sum lambda[i,j,r] (q[i,v(j,r)] + t[i,j] - rho[i,v(j,r)])
//!   - sum mu[i,f] <g[i,j2] - g[i,j1], n_f>
//!   - sum <nu[i,j], g[i,j] - grad_j p[i]>
//! ```
//!
//! is minimized over the primal and maximized over `(g, t) in epi eta*`.
//! It is written as `<K x, y> + <c, x>` with `c` holding the `rho` offsets.

mod energy;
mod kset;

use rayon::prelude::*;

use crate::domain::Grid;
use crate::energies::{DataTerm, Regularizer};
use crate::error::{Error, Result};
use crate::labelspace::Triangulation;

pub use energy::{
    check_dual_feasibility, dual_objective, lifted_energy_at, make_certificate, original_energy, repair_dual,
    FeasibilityReport,
};
pub use kset::{KSetCheck, KSetNorm, KSetSpec};

/// Discretized measures, row `i` holding the coefficients of `u_{X^i}` in
/// the piecewise-linear basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedField {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl LiftedField {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} values for a {rows} x {cols} field", values.len())));
        }
        Ok(Self { rows, cols, values })
    }

    /// Dirac lifting of a label-space function given as `N x s` values.
    pub fn from_dirac(tri: &Triangulation, points: &[f64]) -> Result<Self> {
        let s = tri.dim();
        if points.len() % s != 0 {
            return Err(Error::ShapeMismatch("point array length is not a multiple of dim_s".into()));
        }
        let n = points.len() / s;
        let l = tri.num_labels();
        let mut values = vec![0.0; n * l];
        for (z, row) in points.chunks(s).zip(values.chunks_mut(l)) {
            tri.embed_dirac_into(z, row)?;
        }
        Self::new(n, l, values)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    /// Largest deviation of a row sum from one and most negative entry.
    pub fn simplex_violation(&self) -> (f64, f64) {
        let sum_dev = (0..self.rows).map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
        let neg = self.values.iter().fold(0.0f64, |a, &v| a.min(v));
        (sum_dev, neg)
    }
}

/// Dual point `(p, q, g, t)`; `g` is `N x M x s`, `t` is `N x M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVars {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub g: Vec<f64>,
    pub t: Vec<f64>,
}

impl DualVars {
    pub fn zeros(layout: &Layout) -> Self {
        Self {
            p: vec![0.0; layout.n * layout.l],
            q: vec![0.0; layout.n * layout.l],
            g: vec![0.0; layout.n * layout.m * layout.s],
            t: vec![0.0; layout.n * layout.m],
        }
    }

    pub fn from_flat(layout: &Layout, y: &[f64]) -> Self {
        let [p, q, g, t] = layout.dual_ranges();
        Self { p: y[p].to_vec(), q: y[q].to_vec(), g: y[g].to_vec(), t: y[t].to_vec() }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.p.len() + self.q.len() + self.g.len() + self.t.len());
        y.extend_from_slice(&self.p);
        y.extend_from_slice(&self.q);
        y.extend_from_slice(&self.g);
        y.extend_from_slice(&self.t);
        y
    }
}

/// Constraint multipliers `lambda` (per pixel, simplex, vertex slot), `mu`
/// (per pixel, interior face) and `nu` (per pixel, simplex, coordinate).
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

/// Sizes and flat-vector offsets of the primal `[u | lambda | mu | nu]` and
/// dual `[p | q | g | t]` variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub l: usize,
    pub m: usize,
    pub s: usize,
    pub faces: usize,
}

impl Layout {
    pub fn num_lambda(&self) -> usize {
        self.n * self.m * (self.s + 1)
    }

    pub fn num_mu(&self) -> usize {
        self.n * self.faces
    }

    pub fn num_nu(&self) -> usize {
        self.n * self.m * self.s
    }

    pub fn primal_len(&self) -> usize {
        self.n * self.l + self.num_lambda() + self.num_mu() + self.num_nu()
    }

    pub fn dual_len(&self) -> usize {
        2 * self.n * self.l + self.n * self.m * self.s + self.n * self.m
    }

    pub fn primal_ranges(&self) -> [std::ops::Range<usize>; 4] {
        let a = self.n * self.l;
        let b = a + self.num_lambda();
        let c = b + self.num_mu();
        [0..a, a..b, b..c, c..c + self.num_nu()]
    }

    pub fn dual_ranges(&self) -> [std::ops::Range<usize>; 4] {
        let a = self.n * self.l;
        let b = 2 * a;
        let c = b + self.n * self.m * self.s;
        [0..a, a..b, b..c, c..c + self.n * self.m]
    }
}

#[derive(Debug, Clone)]
struct FaceData {
    j1: usize,
    j2: usize,
    normal: Vec<f64>,
}

/// Assembled lifted saddle-point problem.
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    grid: Grid,
    tri: Triangulation,
    rho: DataTerm,
    reg: Regularizer,
    layout: Layout,
    /// `grad[(j * s + d) * (s+1) + r]`: derivative of the affine interpolant on
    /// simplex `j` along coordinate `d` per unit value at local vertex `r`.
    grad: Vec<f64>,
    faces: Vec<FaceData>,
    incidence: Vec<Vec<(usize, usize)>>,
}

impl SaddleProblem {
    pub fn assemble(grid: Grid, tri: Triangulation, rho: DataTerm, reg: Regularizer) -> Result<Self> {
        if rho.rows() != grid.len() || rho.cols() != tri.num_labels() {
            return Err(Error::ShapeMismatch(format!(
                "data term is {} x {}, expected {} x {}",
                rho.rows(),
                rho.cols(),
                grid.len(),
                tri.num_labels()
            )));
        }
        let s = tri.dim();
        let m = tri.num_simplices();
        let mut grad = vec![0.0; m * s * (s + 1)];
        for j in 0..m {
            let map = tri.bary_map(j);
            for d in 0..s {
                for r in 0..=s {
                    grad[(j * s + d) * (s + 1) + r] = map.grad_coeff(r, d);
                }
            }
        }
        let faces: Vec<FaceData> = tri
            .interior_faces()
            .iter()
            .map(|f| FaceData { j1: f.j1, j2: f.j2, normal: f.normal.clone() })
            .collect();
        let layout = Layout { n: grid.len(), l: tri.num_labels(), m, s, faces: faces.len() };
        let incidence = tri.incidence();
        Ok(Self { grid, tri, rho, reg, layout, grad, faces, incidence })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn tri(&self) -> &Triangulation {
        &self.tri
    }

    pub fn rho(&self) -> &DataTerm {
        &self.rho
    }

    pub fn reg(&self) -> &Regularizer {
        &self.reg
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    #[inline]
    fn grad_coeff(&self, j: usize, d: usize, r: usize) -> f64 {
        let s = self.layout.s;
        self.grad[(j * s + d) * (s + 1) + r]
    }

    /// Per-simplex gradients of one pixel's label coefficients, `M x s`.
    pub(crate) fn gradients_of(&self, coeffs: &[f64], out: &mut [f64]) {
        let Layout { m, s, .. } = self.layout;
        for j in 0..m {
            let verts = self.tri.simplex(j);
            for d in 0..s {
                out[j * s + d] = verts.iter().enumerate().map(|(r, &k)| self.grad_coeff(j, d, r) * coeffs[k]).sum();
            }
        }
    }

    /// Linear term `c`: `rho[i, v(j, r)]` on the `lambda` block, zero elsewhere.
    pub fn linear_term(&self) -> Vec<f64> {
        let lay = self.layout;
        let mut c = vec![0.0; lay.primal_len()];
        let [_, lam, _, _] = lay.primal_ranges();
        let per = lay.m * (lay.s + 1);
        c[lam].par_chunks_mut(per).enumerate().for_each(|(i, block)| {
            for j in 0..lay.m {
                for (r, &k) in self.tri.simplex(j).iter().enumerate() {
                    block[j * (lay.s + 1) + r] = self.rho.get(i, k);
                }
            }
        });
        c
    }

    /// `y_out = K x`.
    pub fn apply(&self, x: &[f64], y_out: &mut [f64]) {
        let lay = self.layout;
        let Layout { l, m, s, faces: nf, .. } = lay;
        let [ur, lr, mr, nr] = lay.primal_ranges();
        let (u, lam, mu, nu) = (&x[ur], &x[lr], &x[mr], &x[nr]);
        let [pr, qr, gr, tr] = lay.dual_ranges();
        let (head, tail) = y_out.split_at_mut(qr.start);
        let (yq, tail) = tail.split_at_mut(gr.start - qr.start);
        let (yg, yt) = tail.split_at_mut(tr.start - gr.start);
        let yp = &mut head[pr];

        yp.par_chunks_mut(l).enumerate().for_each(|(i, row)| {
            self.grid.laplacian_row(u, l, i, row);
            let nu_i = &nu[i * m * s..(i + 1) * m * s];
            for j in 0..m {
                for (r, &k) in self.tri.simplex(j).iter().enumerate() {
                    let mut acc = 0.0;
                    for d in 0..s {
                        acc += self.grad_coeff(j, d, r) * nu_i[j * s + d];
                    }
                    row[k] += acc;
                }
            }
        });
        yq.par_chunks_mut(l).enumerate().for_each(|(i, row)| {
            let lam_i = &lam[i * m * (s + 1)..(i + 1) * m * (s + 1)];
            for (k, out) in row.iter_mut().enumerate() {
                let mut acc = u[i * l + k];
                for &(j, r) in &self.incidence[k] {
                    acc -= lam_i[j * (s + 1) + r];
                }
                *out = acc;
            }
        });
        yg.par_chunks_mut(m * s).enumerate().for_each(|(i, block)| {
            let nu_i = &nu[i * m * s..(i + 1) * m * s];
            for (o, v) in block.iter_mut().zip(nu_i) {
                *o = -v;
            }
            for (f, face) in self.faces.iter().enumerate() {
                let w = mu[i * nf + f];
                for d in 0..s {
                    block[face.j2 * s + d] -= w * face.normal[d];
                    block[face.j1 * s + d] += w * face.normal[d];
                }
            }
        });
        yt.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let lam_i = &lam[i * m * (s + 1)..(i + 1) * m * (s + 1)];
            for (j, out) in row.iter_mut().enumerate() {
                *out = -lam_i[j * (s + 1)..(j + 1) * (s + 1)].iter().sum::<f64>();
            }
        });
    }

    /// `x_out = K^T y`.
    pub fn apply_adjoint(&self, y: &[f64], x_out: &mut [f64]) {
        let lay = self.layout;
        let Layout { l, m, s, faces: nf, .. } = lay;
        let [pr, qr, gr, tr] = lay.dual_ranges();
        let (p, q, g, t) = (&y[pr], &y[qr], &y[gr], &y[tr]);
        let [ur, lr, mr, nr] = lay.primal_ranges();
        let (xu, tail) = x_out.split_at_mut(lr.start);
        let (xl, tail) = tail.split_at_mut(mr.start - lr.start);
        let (xm, xn) = tail.split_at_mut(nr.start - mr.start);
        let xu = &mut xu[ur];

        xu.par_chunks_mut(l).enumerate().for_each(|(i, row)| {
            self.grid.laplacian_row(p, l, i, row);
            for (o, v) in row.iter_mut().zip(&q[i * l..(i + 1) * l]) {
                *o += v;
            }
        });
        xl.par_chunks_mut(m * (s + 1)).enumerate().for_each(|(i, block)| {
            for j in 0..m {
                let tij = t[i * m + j];
                for (r, &k) in self.tri.simplex(j).iter().enumerate() {
                    block[j * (s + 1) + r] = -q[i * l + k] - tij;
                }
            }
        });
        xm.par_chunks_mut(nf.max(1)).enumerate().for_each(|(i, row)| {
            if nf == 0 {
                return;
            }
            let g_i = &g[i * m * s..(i + 1) * m * s];
            for (f, face) in self.faces.iter().enumerate() {
                let mut acc = 0.0;
                for d in 0..s {
                    acc += (g_i[face.j2 * s + d] - g_i[face.j1 * s + d]) * face.normal[d];
                }
                row[f] = -acc;
            }
        });
        xn.par_chunks_mut(m * s).enumerate().for_each(|(i, block)| {
            let p_i = &p[i * l..(i + 1) * l];
            let g_i = &g[i * m * s..(i + 1) * m * s];
            for j in 0..m {
                let verts = self.tri.simplex(j);
                for d in 0..s {
                    let gp: f64 = verts.iter().enumerate().map(|(r, &k)| self.grad_coeff(j, d, r) * p_i[k]).sum();
                    block[j * s + d] = gp - g_i[j * s + d];
                }
            }
        });
    }

    /// Projection of a flat dual vector onto `{(g, t) in epi eta*}`.
    pub fn project_dual(&self, y: &mut [f64]) {
        let Layout { m, s, .. } = self.layout;
        let [_, _, gr, tr] = self.layout.dual_ranges();
        let (head, yt) = y.split_at_mut(tr.start);
        let yg = &mut head[gr];
        yg.par_chunks_mut(s).zip(yt.par_iter_mut()).for_each(|(g, t)| self.reg.epigraph_project(g, t));
        debug_assert_eq!(yt.len(), self.layout.n * m);
    }

    /// Projection of a flat primal vector: unit simplex rows for `u`,
    /// nonnegativity for `lambda` and `mu`.
    pub fn project_primal(&self, x: &mut [f64]) {
        let l = self.layout.l;
        let [ur, lr, mr, _] = self.layout.primal_ranges();
        x[ur].par_chunks_mut(l).for_each_init(Vec::new, |scratch, row| {
            crate::prox::project_simplex_in_place(row, scratch);
        });
        x[lr.start..mr.end].par_iter_mut().for_each(|v| *v = v.max(0.0));
    }

    /// `<K x, y> + <c, x>`.
    pub fn lagrangian(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut kx = vec![0.0; self.layout.dual_len()];
        self.apply(x, &mut kx);
        let c = self.linear_term();
        dot_seq(&kx, y) + dot_seq(&c, x)
    }

    /// Splits a flat primal vector into the lifted field and multipliers.
    pub fn split_primal(&self, x: &[f64]) -> (LiftedField, Multipliers) {
        let [ur, lr, mr, nr] = self.layout.primal_ranges();
        let u = LiftedField { rows: self.layout.n, cols: self.layout.l, values: x[ur].to_vec() };
        (u, Multipliers { lambda: x[lr].to_vec(), mu: x[mr].to_vec(), nu: x[nr].to_vec() })
    }

    /// Flat primal vector from a lifted field and (optional) multipliers.
    pub fn join_primal(&self, u: &LiftedField, mult: Option<&Multipliers>) -> Vec<f64> {
        let mut x = vec![0.0; self.layout.primal_len()];
        let [ur, lr, mr, nr] = self.layout.primal_ranges();
        x[ur].copy_from_slice(&u.values);
        if let Some(mm) = mult {
            x[lr].copy_from_slice(&mm.lambda);
            x[mr].copy_from_slice(&mm.mu);
            x[nr].copy_from_slice(&mm.nu);
        }
        x
    }
}

/// Sequential dot product (fixed summation order).
pub(crate) fn dot_seq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
