//! Mapping lifted solutions back to label-space functions.

use std::io::Write;
use std::path::Path;

use crate::error::{invalid, Error, Result};
use crate::lifting::LiftedField;
use crate::labelspace::{dist, Triangulation};

/// Support pruning threshold applied before mode analysis.
pub const SUPPORT_EPS: f64 = 1e-3;

/// Cumulative mass must exceed the threshold by this much to count, so that
/// ties left inexact by the solver resolve the same way at every pixel.
pub const THRESHOLD_SLACK: f64 = 1e-4;

/// One label-space point per grid point, row-major `N x s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundedField {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl RoundedField {
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// CSV with the grid index columns followed by the `s` value columns.
    pub fn write_csv(&self, shape: &[usize], path: impl AsRef<Path>) -> Result<()> {
        let cols = *shape.last().unwrap_or(&1);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let idx_header = if shape.len() == 2 { "y,x" } else { "x" };
        let val_header: Vec<String> = (0..self.dim).map(|d| format!("v{d}")).collect();
        writeln!(out, "{idx_header},{}", val_header.join(","))?;
        for i in 0..self.len() {
            let idx = if shape.len() == 2 { format!("{},{}", i / cols, i % cols) } else { i.to_string() };
            let vals: Vec<String> = self.point(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{idx},{}", vals.join(","))?;
        }
        Ok(())
    }
}

/// Mean of each measure: `sum_k u[i,k] Z^k`.
pub fn round_mean(tri: &Triangulation, u: &LiftedField) -> Result<RoundedField> {
    check_cols(tri, u)?;
    let s = tri.dim();
    let mut values = vec![0.0; u.rows * s];
    for i in 0..u.rows {
        for (k, &w) in u.row(i).iter().enumerate() {
            for d in 0..s {
                values[i * s + d] += w * tri.label(k)[d];
            }
        }
    }
    Ok(RoundedField { dim: s, values })
}

/// Point masses of one row for thresholding, sorted by position.
///
/// Isolated pairs of adjacent positive entries are read as one sublabel Dirac
/// at their barycentric point; every other positive entry is a point mass at
/// its vertex (mass at a vertex counts toward `(-inf, vertex]`).
fn atoms_1d(tri: &Triangulation, row: &[f64]) -> Vec<(f64, f64)> {
    let l = row.len();
    let positive = |k: usize| row[k] > 1e-12;
    let mut atoms = Vec::new();
    let mut k = 0;
    while k < l {
        if !positive(k) {
            k += 1;
            continue;
        }
        let start = k;
        while k < l && positive(k) {
            k += 1;
        }
        if k - start == 2 {
            let (a, b) = (row[start], row[start + 1]);
            let z = (a * tri.label(start)[0] + b * tri.label(start + 1)[0]) / (a + b);
            atoms.push((z, a + b));
        } else {
            atoms.extend((start..k).map(|v| (tri.label(v)[0], row[v])));
        }
    }
    atoms
}

/// `u(x) = inf { t : u_x((-inf, t]) > s }` on an ascending 1D label space.
pub fn round_threshold(tri: &Triangulation, u: &LiftedField, s_thresh: f64) -> Result<RoundedField> {
    check_cols(tri, u)?;
    if tri.dim() != 1 {
        return Err(invalid("thresholding needs a 1D label space"));
    }
    if !(0.0..1.0).contains(&s_thresh) {
        return Err(invalid(format!("threshold {s_thresh} outside [0, 1)")));
    }
    if (1..tri.num_labels()).any(|k| tri.label(k)[0] <= tri.label(k - 1)[0]) {
        return Err(invalid("labels must be ascending"));
    }
    let top = tri.label(tri.num_labels() - 1)[0];
    let values = (0..u.rows)
        .map(|i| {
            let mut cum = 0.0;
            atoms_1d(tri, u.row(i))
                .into_iter()
                .find(|&(_, w)| {
                    cum += w;
                    cum > s_thresh + THRESHOLD_SLACK
                })
                .map_or(top, |(z, _)| z)
        })
        .collect();
    Ok(RoundedField { dim: 1, values })
}

/// A connected cluster of mass in one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Mode {
    pub position: Vec<f64>,
    pub weight: f64,
}

/// Per-pixel modes: connected components of the label adjacency graph
/// restricted to entries above [`SUPPORT_EPS`]. Entries below it join the
/// heaviest adjacent component, or the nearest one when none is adjacent. Components lighter than `mass_tol`
/// are dropped; the rest are sorted by weight and truncated to `max_modes`.
pub fn extract_modes(tri: &Triangulation, u: &LiftedField, mass_tol: f64, max_modes: usize) -> Result<Vec<Vec<Mode>>> {
    check_cols(tri, u)?;
    if !(mass_tol > 0.0 && mass_tol < 1.0) {
        return Err(invalid(format!("mass_tol {mass_tol} outside (0, 1)")));
    }
    let l = tri.num_labels();
    let mut adj = vec![Vec::new(); l];
    for (a, b) in tri.label_edges() {
        adj[a].push(b);
        adj[b].push(a);
    }
    let s = tri.dim();
    let mut result = Vec::with_capacity(u.rows);
    let mut comp = vec![usize::MAX; l];
    for i in 0..u.rows {
        let row = u.row(i);
        comp.iter_mut().for_each(|c| *c = usize::MAX);
        let mut n_comp = 0;
        for start in 0..l {
            if row[start] < SUPPORT_EPS || comp[start] != usize::MAX {
                continue;
            }
            let mut stack = vec![start];
            comp[start] = n_comp;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if comp[w] == usize::MAX && row[w] >= SUPPORT_EPS {
                        comp[w] = n_comp;
                        stack.push(w);
                    }
                }
            }
            n_comp += 1;
        }
        let mut weight = vec![0.0; n_comp];
        let mut moment = vec![0.0; n_comp * s];
        for k in 0..l {
            let w = row[k].max(0.0);
            if w == 0.0 {
                continue;
            }
            let c = if comp[k] != usize::MAX {
                Some(comp[k])
            } else {
                // heaviest adjacent supported vertex, else the nearest one
                let adjacent = adj[k].iter().copied().filter(|&o| comp[o] != usize::MAX).max_by(|&a, &b| row[a].total_cmp(&row[b]));
                adjacent
                    .or_else(|| {
                        (0..l)
                            .filter(|&o| comp[o] != usize::MAX)
                            .min_by(|&a, &b| dist(tri.label(a), tri.label(k)).total_cmp(&dist(tri.label(b), tri.label(k))))
                    })
                    .map(|o| comp[o])
            };
            if let Some(c) = c {
                weight[c] += w;
                for d in 0..s {
                    moment[c * s + d] += w * tri.label(k)[d];
                }
            }
        }
        let mut modes: Vec<Mode> = (0..n_comp)
            .filter(|&c| weight[c] >= mass_tol)
            .map(|c| Mode {
                position: (0..s).map(|d| moment[c * s + d] / weight[c]).collect(),
                weight: weight[c],
            })
            .collect();
        modes.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        modes.truncate(max_modes);
        result.push(modes);
    }
    Ok(result)
}

fn check_cols(tri: &Triangulation, u: &LiftedField) -> Result<()> {
    if u.cols != tri.num_labels() {
        return Err(Error::ShapeMismatch(format!("field has {} columns for {} labels", u.cols, tri.num_labels())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Triangulation {
        Triangulation::interval(-1.0, 1.0, 3).unwrap()
    }

    fn field(rows: &[&[f64]]) -> LiftedField {
        let cols = rows[0].len();
        LiftedField::new(rows.len(), cols, rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn mean_examples() {
        let t = three();
        let r = round_mean(&t, &field(&[&[0.0, 0.0, 1.0], &[0.5, 0.0, 0.5]])).unwrap();
        assert_eq!(r.values, vec![1.0, 0.0]);
        let u = LiftedField::from_dirac(&t, &[0.37]).unwrap();
        assert!((round_mean(&t, &u).unwrap().values[0] - 0.37).abs() < 1e-15);
    }

    #[test]
    fn threshold_examples() {
        let t = three();
        let split = field(&[&[0.5, 0.0, 0.5]]);
        assert_eq!(round_threshold(&t, &split, 0.4).unwrap().values, vec![-1.0]);
        assert_eq!(round_threshold(&t, &split, 0.6).unwrap().values, vec![1.0]);
        let hit = field(&[&[0.0, 1.0, 0.0]]);
        for s in [0.0, 0.3, 0.99] {
            assert_eq!(round_threshold(&t, &hit, s).unwrap().values, vec![0.0]);
        }
        assert!(round_threshold(&t, &hit, 1.0).is_err());
        assert!(round_threshold(&t, &hit, -0.1).is_err());
    }

    #[test]
    fn threshold_recovers_sublabel_dirac() {
        let t = Triangulation::interval(-1.0, 1.0, 5).unwrap();
        let u = LiftedField::from_dirac(&t, &[0.3]).unwrap();
        for s in [0.0, 0.5, 0.9] {
            assert!((round_threshold(&t, &u, s).unwrap().values[0] - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_examples() {
        let t = three();
        let modes = extract_modes(&t, &field(&[&[0.0, 1.0, 0.0]]), 0.1, 4).unwrap();
        assert_eq!(modes[0], vec![Mode { position: vec![0.0], weight: 1.0 }]);
        let modes = extract_modes(&t, &field(&[&[0.5, 0.0, 0.5]]), 0.1, 4).unwrap();
        assert_eq!(modes[0].len(), 2);
        let mut pos: Vec<f64> = modes[0].iter().map(|m| m.position[0]).collect();
        pos.sort_by(f64::total_cmp);
        assert_eq!(pos, vec![-1.0, 1.0]);
        assert!(modes[0].iter().all(|m| m.weight == 0.5));
        let modes = extract_modes(&t, &field(&[&[0.25, 0.5, 0.25]]), 0.1, 4).unwrap();
        assert_eq!(modes[0], vec![Mode { position: vec![0.0], weight: 1.0 }]);
    }

    #[test]
    fn pruned_mass_joins_neighbor() {
        let t = Triangulation::interval(-1.0, 1.0, 5).unwrap();
        let modes = extract_modes(&t, &field(&[&[0.0005, 0.4995, 0.0, 0.25, 0.25]]), 1e-6, 8).unwrap();
        let total: f64 = modes[0].iter().map(|m| m.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(modes[0].len(), 2);
        let isolated = extract_modes(&t, &field(&[&[0.0005, 0.0, 0.9995, 0.0, 0.0]]), 1e-12, 8).unwrap();
        assert_eq!(isolated[0].len(), 1);
        assert!((isolated[0][0].weight - 1.0).abs() < 1e-15);
    }
}
