//! Triangulated label spaces and piecewise-linear finite elements on them.
//!
//! A [`Triangulation`] stores the labels `Z^k` (rows of an `L x s` matrix), the
//! simplices as vertex index tuples, the interior faces with their unit normals
//! and one barycentric map per simplex. Label dimensions 1 and 2 are supported.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on negative barycentric coordinates when deciding membership.
pub const LOCATE_TOL: f64 = 1e-9;

/// Face shared by two simplices; `normal` points from `j1` into `j2`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorFace {
    pub j1: usize,
    pub j2: usize,
    pub normal: Vec<f64>,
}

/// Affine map `z -> alpha(z)` onto the barycentric coordinates of one simplex.
///
/// Stores the inverse of the `(s+1) x (s+1)` matrix `[T_j^T; 1^T]`, so that
/// `alpha = inv * [z; 1]`.
#[derive(Debug, Clone)]
pub struct BarycentricMap {
    dim: usize,
    inv: Vec<f64>,
}

impl BarycentricMap {
    fn new(vertices: &[&[f64]]) -> Result<Self> {
        let n = vertices.len();
        let dim = n - 1;
        let mut m = DMatrix::<f64>::zeros(n, n);
        for (c, v) in vertices.iter().enumerate() {
            for d in 0..dim {
                m[(d, c)] = v[d];
            }
            m[(dim, c)] = 1.0;
        }
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("singular simplex matrix".into()))?;
        let mut flat = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                flat[r * n + c] = inv[(r, c)];
            }
        }
        Ok(Self { dim, inv: flat })
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim + 1;
        (0..n)
            .map(|r| {
                let row = &self.inv[r * n..(r + 1) * n];
                row[..self.dim].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + row[self.dim]
            })
            .collect()
    }

    /// Entry `(r, d)` of the gradient matrix: `d/dz_d alpha_r`.
    #[inline]
    pub fn grad_coeff(&self, r: usize, d: usize) -> f64 {
        self.inv[r * (self.dim + 1) + d]
    }
}

#[derive(Debug, Clone)]
pub struct Triangulation {
    dim: usize,
    labels: Vec<f64>,
    simplices: Vec<usize>,
    interior_faces: Vec<InteriorFace>,
    boundary_faces: usize,
    boundary_simplices: Vec<usize>,
    bary: Vec<BarycentricMap>,
    diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TriangulationJson {
    pub dim_s: usize,
    pub labels: Vec<Vec<f64>>,
    pub simplices: Vec<Vec<usize>>,
}

impl Triangulation {
    /// Builds a triangulation from label rows and simplex vertex tuples and
    /// derives faces, normals and barycentric maps.
    pub fn new(dim: usize, labels: Vec<Vec<f64>>, simplices: Vec<Vec<usize>>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(invalid(format!("label dimension {dim} not supported")));
        }
        if labels.is_empty() || simplices.is_empty() {
            return Err(invalid("empty triangulation"));
        }
        if labels.iter().any(|z| z.len() != dim || z.iter().any(|v| !v.is_finite())) {
            return Err(invalid("label rows must be finite with length dim_s"));
        }
        let n_labels = labels.len();
        if simplices
            .iter()
            .any(|s| s.len() != dim + 1 || s.iter().any(|&k| k >= n_labels))
        {
            return Err(invalid("simplex index tuple has wrong arity or out-of-range index"));
        }
        let flat: Vec<f64> = labels.iter().flatten().copied().collect();
        let mut diameter: f64 = 0.0;
        for a in &labels {
            for b in &labels {
                diameter = diameter.max(dist(a, b));
            }
        }

        let mut bary = Vec::with_capacity(simplices.len());
        for (j, s) in simplices.iter().enumerate() {
            let verts: Vec<&[f64]> = s.iter().map(|&k| labels[k].as_slice()).collect();
            let vol = signed_volume(&verts).abs();
            if vol <= 1e-12 * diameter.powi(dim as i32) {
                return Err(Error::Degenerate(format!("simplex {j} has volume {vol:e}")));
            }
            bary.push(BarycentricMap::new(&verts)?);
        }

        // face key (sorted vertex tuple) -> [(simplex, opposite vertex)]
        let mut faces: BTreeMap<Vec<usize>, Vec<(usize, usize)>> = BTreeMap::new();
        for (j, s) in simplices.iter().enumerate() {
            for omit in 0..=dim {
                let mut key: Vec<usize> = s
                    .iter()
                    .enumerate()
                    .filter(|&(r, _)| r != omit)
                    .map(|(_, &k)| k)
                    .collect();
                key.sort_unstable();
                faces.entry(key).or_default().push((j, s[omit]));
            }
        }

        let mut interior_faces = Vec::new();
        let mut boundary_faces = 0;
        let mut on_boundary = vec![false; simplices.len()];
        for (key, owners) in &faces {
            match owners.as_slice() {
                [(j, _)] => {
                    boundary_faces += 1;
                    on_boundary[*j] = true;
                }
                [(ja, oa), (jb, _)] => {
                    let (j1, j2) = (*ja.min(jb), *ja.max(jb));
                    let opp1 = if j1 == *ja { *oa } else { owners[1].1 };
                    let normal = face_normal(&labels, key, opp1);
                    interior_faces.push(InteriorFace { j1, j2, normal });
                }
                _ => {
                    return Err(Error::Degenerate(format!(
                        "face {key:?} shared by {} simplices",
                        owners.len()
                    )))
                }
            }
        }
        interior_faces.sort_by_key(|f| (f.j1, f.j2));
        let boundary_simplices = (0..simplices.len()).filter(|&j| on_boundary[j]).collect();

        Ok(Self {
            dim,
            labels: flat,
            simplices: simplices.into_iter().flatten().collect(),
            interior_faces,
            boundary_faces,
            boundary_simplices,
            bary,
            diameter,
        })
    }

    /// `count` equally spaced labels on `[a, b]`, joined into consecutive segments.
    pub fn interval(a: f64, b: f64, count: usize) -> Result<Self> {
        if count < 2 || !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("interval needs a < b and at least 2 labels (got [{a}, {b}], {count})")));
        }
        let h = (b - a) / (count - 1) as f64;
        let labels = (0..count)
            .map(|k| vec![if k + 1 == count { b } else { a + h * k as f64 }])
            .collect();
        let simplices = (0..count - 1).map(|k| vec![k, k + 1]).collect();
        Self::new(1, labels, simplices)
    }

    /// Disk of the given radius: a center vertex plus concentric rings at radii
    /// `radius * (r+1) / rings`, fan-triangulated around the center and stitched
    /// between consecutive rings by angle.
    pub fn disk(radius: f64, ring_counts: &[usize]) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("disk radius must be positive, got {radius}")));
        }
        if ring_counts.is_empty() || ring_counts.iter().any(|&c| c < 3) {
            return Err(invalid(format!("ring counts must be nonempty and >= 3, got {ring_counts:?}")));
        }
        let n_rings = ring_counts.len();
        let mut labels = vec![vec![0.0, 0.0]];
        let mut ring_start = Vec::with_capacity(n_rings);
        for (r, &count) in ring_counts.iter().enumerate() {
            ring_start.push(labels.len());
            let rad = radius * (r + 1) as f64 / n_rings as f64;
            for i in 0..count {
                let a = 2.0 * PI * i as f64 / count as f64;
                labels.push(vec![rad * a.cos(), rad * a.sin()]);
            }
        }

        let mut simplices = Vec::new();
        let c0 = ring_counts[0];
        for i in 0..c0 {
            simplices.push(vec![0, ring_start[0] + i, ring_start[0] + (i + 1) % c0]);
        }
        for r in 1..n_rings {
            let (ci, co) = (ring_counts[r - 1], ring_counts[r]);
            let (si, so) = (ring_start[r - 1], ring_start[r]);
            let (mut i, mut o) = (0, 0);
            while i < ci || o < co {
                let next_in = (i + 1) as f64 / ci as f64;
                let next_out = (o + 1) as f64 / co as f64;
                let inner = si + i % ci;
                let outer = so + o % co;
                if o == co || (i < ci && next_in < next_out) {
                    simplices.push(vec![inner, si + (i + 1) % ci, outer]);
                    i += 1;
                } else {
                    simplices.push(vec![inner, outer, so + (o + 1) % co]);
                    o += 1;
                }
            }
        }
        Self::new(2, labels, simplices)
    }

    pub fn from_json(json: &TriangulationJson) -> Result<Self> {
        Self::new(json.dim_s, json.labels.clone(), json.simplices.clone())
    }

    pub fn to_json(&self) -> TriangulationJson {
        TriangulationJson {
            dim_s: self.dim,
            labels: (0..self.num_labels()).map(|k| self.label(k).to_vec()).collect(),
            simplices: (0..self.num_simplices()).map(|j| self.simplex(j).to_vec()).collect(),
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn num_labels(&self) -> usize {
        self.labels.len() / self.dim
    }

    #[inline]
    pub fn num_simplices(&self) -> usize {
        self.bary.len()
    }

    #[inline]
    pub fn label(&self, k: usize) -> &[f64] {
        &self.labels[k * self.dim..(k + 1) * self.dim]
    }

    /// Vertex indices of simplex `j`.
    #[inline]
    pub fn simplex(&self, j: usize) -> &[usize] {
        let n = self.dim + 1;
        &self.simplices[j * n..(j + 1) * n]
    }

    pub fn interior_faces(&self) -> &[InteriorFace] {
        &self.interior_faces
    }

    pub fn boundary_simplices(&self) -> &[usize] {
        &self.boundary_simplices
    }

    /// Total number of faces (interior and boundary).
    pub fn num_faces(&self) -> usize {
        self.interior_faces.len() + self.boundary_faces
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn bary_map(&self, j: usize) -> &BarycentricMap {
        &self.bary[j]
    }

    /// Signed barycentric coordinates of `z` with respect to simplex `j`.
    pub fn barycentric(&self, j: usize, z: &[f64]) -> Result<Vec<f64>> {
        if j >= self.num_simplices() {
            return Err(invalid(format!("simplex index {j} out of range")));
        }
        if z.len() != self.dim {
            return Err(Error::ShapeMismatch(format!("point has {} coordinates, expected {}", z.len(), self.dim)));
        }
        Ok(self.bary[j].apply(z))
    }

    /// Lowest-index simplex containing `z` up to [`LOCATE_TOL`].
    pub fn locate(&self, z: &[f64]) -> Result<usize> {
        if z.len() != self.dim {
            return Err(Error::ShapeMismatch(format!("point has {} coordinates, expected {}", z.len(), self.dim)));
        }
        (0..self.num_simplices())
            .find(|&j| self.bary[j].apply(z).iter().all(|&a| a >= -LOCATE_TOL))
            .ok_or_else(|| Error::OutOfRange { point: z.to_vec() })
    }

    /// Sublabel-accurate lifting of a point: its barycentric weights scattered
    /// onto the label vertices of the containing simplex.
    pub fn embed_dirac(&self, z: &[f64]) -> Result<Vec<f64>> {
        let mut row = vec![0.0; self.num_labels()];
        self.embed_dirac_into(z, &mut row)?;
        Ok(row)
    }

    pub fn embed_dirac_into(&self, z: &[f64], row: &mut [f64]) -> Result<()> {
        let j = self.locate(z)?;
        let mut alpha = self.bary[j].apply(z);
        for a in alpha.iter_mut() {
            *a = a.max(0.0);
        }
        let total: f64 = alpha.iter().sum();
        row.iter_mut().for_each(|v| *v = 0.0);
        for (r, &k) in self.simplex(j).iter().enumerate() {
            row[k] += alpha[r] / total;
        }
        Ok(())
    }

    /// Gradient of the affine function on simplex `j` with the given vertex values.
    pub fn pl_gradient(&self, j: usize, vertex_values: &[f64]) -> Vec<f64> {
        let map = &self.bary[j];
        (0..self.dim)
            .map(|d| (0..=self.dim).map(|r| map.grad_coeff(r, d) * vertex_values[r]).sum())
            .collect()
    }

    /// Gradient on simplex `j` of the PL function with label coefficients `coeffs`.
    pub fn pl_gradient_of(&self, j: usize, coeffs: &[f64]) -> Vec<f64> {
        let vals: Vec<f64> = self.simplex(j).iter().map(|&k| coeffs[k]).collect();
        self.pl_gradient(j, &vals)
    }

    /// Evaluates the PL function `sum_k coeffs[k] Phi_k(z)`.
    pub fn evaluate_pl(&self, coeffs: &[f64], z: &[f64]) -> Result<f64> {
        if coeffs.len() != self.num_labels() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for {} labels",
                coeffs.len(),
                self.num_labels()
            )));
        }
        let j = self.locate(z)?;
        let alpha = self.bary[j].apply(z);
        Ok(alpha.iter().zip(self.simplex(j)).map(|(a, &k)| a * coeffs[k]).sum())
    }

    /// Uniformly random point of simplex `j`.
    pub fn sample_in_simplex<R: Rng + ?Sized>(&self, j: usize, rng: &mut R) -> Vec<f64> {
        let alpha = random_simplex_weights(self.dim + 1, rng);
        self.point_from_bary(j, &alpha)
    }

    /// `T_j^T alpha`.
    pub fn point_from_bary(&self, j: usize, alpha: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; self.dim];
        for (r, &k) in self.simplex(j).iter().enumerate() {
            for (zd, ld) in z.iter_mut().zip(self.label(k)) {
                *zd += alpha[r] * ld;
            }
        }
        z
    }

    /// Uniformly random point of the label space (area weighted).
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let vols: Vec<f64> = (0..self.num_simplices()).map(|j| self.volume(j)).collect();
        let total: f64 = vols.iter().sum();
        let mut pick = rng.gen::<f64>() * total;
        let mut j = vols.len() - 1;
        for (i, v) in vols.iter().enumerate() {
            if pick < *v {
                j = i;
                break;
            }
            pick -= v;
        }
        self.sample_in_simplex(j, rng)
    }

    pub fn volume(&self, j: usize) -> f64 {
        let verts: Vec<&[f64]> = self.simplex(j).iter().map(|&k| self.label(k)).collect();
        signed_volume(&verts).abs()
    }

    /// Pairs of labels joined by a simplex edge, each listed once with `a < b`.
    pub fn label_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for j in 0..self.num_simplices() {
            let s = self.simplex(j);
            for a in 0..s.len() {
                for b in a + 1..s.len() {
                    edges.push((s[a].min(s[b]), s[a].max(s[b])));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// For every label, the `(simplex, local vertex slot)` pairs it appears in.
    pub fn incidence(&self) -> Vec<Vec<(usize, usize)>> {
        let mut inc = vec![Vec::new(); self.num_labels()];
        for j in 0..self.num_simplices() {
            for (r, &k) in self.simplex(j).iter().enumerate() {
                inc[k].push((j, r));
            }
        }
        inc
    }

    /// Checks the mesh invariants: non-degenerate simplices, unit normals,
    /// every label covered, and sampled non-overlap of simplex interiors.
    pub fn validate<R: Rng + ?Sized>(&self, samples_per_simplex: usize, rng: &mut R) -> Result<()> {
        let scale = self.diameter.powi(self.dim as i32);
        for j in 0..self.num_simplices() {
            if self.volume(j) <= 1e-12 * scale {
                return Err(Error::Degenerate(format!("simplex {j} is degenerate")));
            }
        }
        for f in &self.interior_faces {
            let n = norm2(&f.normal);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::Degenerate(format!("face normal has length {n}")));
            }
        }
        let mut covered = vec![false; self.num_labels()];
        for &k in &self.simplices {
            covered[k] = true;
        }
        if let Some(k) = covered.iter().position(|c| !c) {
            return Err(Error::Degenerate(format!("label {k} not in any simplex")));
        }
        for j in 0..self.num_simplices() {
            for _ in 0..samples_per_simplex {
                // strictly interior sample: inside j and no other simplex
                let mut alpha = random_simplex_weights(self.dim + 1, rng);
                for a in alpha.iter_mut() {
                    *a = 0.05 + 0.9 * *a;
                }
                let sum: f64 = alpha.iter().sum();
                alpha.iter_mut().for_each(|a| *a /= sum);
                let z = self.point_from_bary(j, &alpha);
                let owners = (0..self.num_simplices())
                    .filter(|&i| self.bary[i].apply(&z).iter().all(|&a| a > 1e-9))
                    .count();
                if owners != 1 {
                    return Err(Error::Degenerate(format!(
                        "interior point of simplex {j} lies in {owners} simplex interiors"
                    )));
                }
                if self.locate(&z)? != j {
                    return Err(Error::Degenerate(format!("point location inconsistent for simplex {j}")));
                }
            }
        }
        Ok(())
    }
}

/// Uniform sample from the unit simplex with `n` vertices.
pub fn random_simplex_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn signed_volume(verts: &[&[f64]]) -> f64 {
    match verts.len() {
        2 => verts[1][0] - verts[0][0],
        3 => {
            let (a, b, c) = (verts[0], verts[1], verts[2]);
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        }
        _ => unreachable!("only 1D and 2D simplices"),
    }
}

fn face_normal(labels: &[Vec<f64>], face: &[usize], opposite: usize) -> Vec<f64> {
    let base = &labels[face[0]];
    let away: Vec<f64> = base.iter().zip(&labels[opposite]).map(|(b, o)| b - o).collect();
    let mut n = match face.len() {
        1 => vec![1.0],
        2 => {
            let e = &labels[face[1]];
            vec![e[1] - base[1], base[0] - e[0]]
        }
        _ => unreachable!("only 1D and 2D simplices"),
    };
    let len = norm2(&n);
    n.iter_mut().for_each(|v| *v /= len);
    if dot(&n, &away) < 0.0 {
        n.iter_mut().for_each(|v| *v = -*v);
    }
    n
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
