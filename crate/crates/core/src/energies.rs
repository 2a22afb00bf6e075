//! Data terms sampled on grid x labels, and Laplacian regularizers with their
//! conjugates, gradients and conjugate-epigraph projections.

use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{invalid, Error, Result};
use crate::labelspace::{dot, norm2, Triangulation};
use crate::prox;
use crate::registration::Image;

/// `rho[i, k] = rho(X^i, Z^k)`, row-major `N x L`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTerm {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataTerm {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} values for a {rows} x {cols} data term", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("data term contains non-finite entries"));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, values: vec![0.0; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.values[i * self.cols + k]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// `rho(x, z) = 1/2 (R(x) - T(x + z))^2` with clamped bilinear sampling of the
/// template. Labels are displacements in pixels, `(dx, dy)` for 2D label
/// spaces and `dx` for 1D ones.
pub fn sample_registration(reference: &Image, template: &Image, grid: &Grid, tri: &Triangulation) -> Result<DataTerm> {
    if reference.width() != template.width() || reference.height() != template.height() {
        return Err(Error::ShapeMismatch("reference and template differ in size".into()));
    }
    let expected = if grid.dims() == 1 { [1, grid.shape()[0]] } else { [grid.shape()[0], grid.shape()[1]] };
    if [reference.height(), reference.width()] != expected {
        return Err(Error::ShapeMismatch(format!(
            "image is {}x{} but grid is {:?}",
            reference.height(),
            reference.width(),
            grid.shape()
        )));
    }
    let n_labels = tri.num_labels();
    let mut values = Vec::with_capacity(grid.len() * n_labels);
    for i in 0..grid.len() {
        let (r, c) = grid.coords(i);
        let base = reference.get(c, r);
        for k in 0..n_labels {
            let z = tri.label(k);
            let (dx, dy) = if tri.dim() == 2 { (z[0], z[1]) } else { (z[0], 0.0) };
            let warped = template.sample(c as f64 + dx, r as f64 + dy);
            values.push(0.5 * (base - warped) * (base - warped));
        }
    }
    DataTerm::new(grid.len(), n_labels, values)
}

/// Grid positions of `n` equally spaced points on `[-1, 1]`.
pub fn unit_interval_positions(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| if i + 1 == n { 1.0 } else { -1.0 + 2.0 * i as f64 / (n - 1) as f64 }).collect()
}

/// `rho(x, z) = (|x| - |z|)^2` on a 1D grid spread over `[-1, 1]`.
pub fn sample_absdiff_squared(grid: &Grid, tri: &Triangulation) -> Result<DataTerm> {
    if grid.dims() != 1 || tri.dim() != 1 {
        return Err(invalid("the |x| - |z| data term needs a 1D grid and 1D labels"));
    }
    let xs = unit_interval_positions(grid.len());
    let values = xs
        .iter()
        .flat_map(|x| (0..tri.num_labels()).map(move |k| (x.abs() - tri.label(k)[0].abs()).powi(2)))
        .collect();
    DataTerm::new(grid.len(), tri.num_labels(), values)
}

/// Relative slack on norm-ball indicators so gradients of the norm count as feasible.
const INDICATOR_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerKind {
    /// `weight / 2 * |p|_2^2`
    SquaredEuclid,
    /// `weight * |p|_1`
    OneNorm,
    /// `weight * |p|_2`
    EuclidNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Regularizer {
    pub kind: RegularizerKind,
    pub weight: f64,
}

impl Regularizer {
    pub fn new(kind: RegularizerKind, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(invalid(format!("regularizer weight must be finite and >= 0, got {weight}")));
        }
        Ok(Self { kind, weight })
    }

    pub fn squared_euclid(weight: f64) -> Self {
        Self { kind: RegularizerKind::SquaredEuclid, weight }
    }

    pub fn value(&self, p: &[f64]) -> f64 {
        let w = self.weight;
        match self.kind {
            RegularizerKind::SquaredEuclid => 0.5 * w * dot(p, p),
            RegularizerKind::OneNorm => w * p.iter().map(|v| v.abs()).sum::<f64>(),
            RegularizerKind::EuclidNorm => w * norm2(p),
        }
    }

    /// Convex conjugate; `+inf` outside its domain.
    pub fn conjugate(&self, g: &[f64]) -> f64 {
        let w = self.weight;
        match self.kind {
            RegularizerKind::SquaredEuclid => {
                if w > 0.0 {
                    dot(g, g) / (2.0 * w)
                } else if g.iter().all(|&v| v == 0.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            RegularizerKind::OneNorm => {
                if g.iter().all(|v| v.abs() <= w * (1.0 + INDICATOR_SLACK)) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            RegularizerKind::EuclidNorm => {
                if norm2(g) <= w * (1.0 + INDICATOR_SLACK) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// A (sub)gradient; `sign(0) = 0` for the norms.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let w = self.weight;
        match self.kind {
            RegularizerKind::SquaredEuclid => p.iter().map(|v| w * v).collect(),
            RegularizerKind::OneNorm => p.iter().map(|&v| if v == 0.0 { 0.0 } else { w * v.signum() }).collect(),
            RegularizerKind::EuclidNorm => {
                let n = norm2(p);
                if n == 0.0 {
                    vec![0.0; p.len()]
                } else {
                    p.iter().map(|v| w * v / n).collect()
                }
            }
        }
    }

    /// Finite measure of how far `(g, t)` is from `{conjugate(g) <= t}`.
    pub fn epigraph_violation(&self, g: &[f64], t: f64) -> f64 {
        let w = self.weight;
        match self.kind {
            RegularizerKind::SquaredEuclid if w > 0.0 => (dot(g, g) / (2.0 * w) - t).max(0.0),
            RegularizerKind::SquaredEuclid => norm2(g).max(-t).max(0.0),
            RegularizerKind::OneNorm => {
                let m = g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                (m - w).max(-t).max(0.0)
            }
            RegularizerKind::EuclidNorm => (norm2(g) - w).max(-t).max(0.0),
        }
    }

    /// Euclidean projection of `(g, t)` onto the epigraph of the conjugate.
    pub fn epigraph_project(&self, g: &mut [f64], t: &mut f64) {
        let w = self.weight;
        match self.kind {
            RegularizerKind::SquaredEuclid if w > 0.0 => prox::project_parabola_epigraph(g, t, 0.5 / w),
            RegularizerKind::SquaredEuclid => {
                g.iter_mut().for_each(|v| *v = 0.0);
                *t = t.max(0.0);
            }
            RegularizerKind::OneNorm => {
                prox::project_box(g, w);
                *t = t.max(0.0);
            }
            RegularizerKind::EuclidNorm => {
                prox::project_ball(g, w);
                *t = t.max(0.0);
            }
        }
    }
}
