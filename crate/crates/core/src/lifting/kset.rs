//! The constraint set of the conjugated lifted absolute-Laplacian regularizer.
//!
//! A PL function `f` on the label triangulation belongs to the set when
//!
//! ```text
//! sum_{l=1..m} (f(t^l) - f(t^0)) <= | sum_{l=1..m} (t^l - t^0) |
//! ```
//!
//! for all points `t^l` of the label space. For `m >= 2` this is the same as
//! `f` being concave and 1-Lipschitz, and concavity lets the Lipschitz bound
//! be checked on boundary simplices only.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::labelspace::{dot, random_simplex_weights, Triangulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KSetNorm {
    OneNorm,
    EuclidNorm,
}

impl KSetNorm {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            KSetNorm::OneNorm => v.iter().map(|x| x.abs()).sum(),
            KSetNorm::EuclidNorm => dot(v, v).sqrt(),
        }
    }

    pub fn dual_norm(self, v: &[f64]) -> f64 {
        match self {
            KSetNorm::OneNorm => v.iter().fold(0.0, |a: f64, x| a.max(x.abs())),
            KSetNorm::EuclidNorm => dot(v, v).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KSetSpec<'a> {
    pub tri: &'a Triangulation,
    pub norm: KSetNorm,
    /// Stencil size (number of neighbors `m`).
    pub stencil: usize,
}

/// Outcome of the reduced (finite) membership test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSetCheck {
    pub member: bool,
    /// Nonlinear constraints evaluated: one per interior face, one per boundary simplex.
    pub constraints: usize,
    pub worst_concavity: f64,
    pub worst_gradient: f64,
}

/// One sampled tuple `(j_l, alpha^l)` for `l = 0..=m`.
struct Tuple {
    points: Vec<(usize, Vec<f64>)>,
}

impl<'a> KSetSpec<'a> {
    pub fn new(tri: &'a Triangulation, norm: KSetNorm, stencil: usize) -> Result<Self> {
        if stencil == 0 {
            return Err(invalid("stencil size must be positive"));
        }
        Ok(Self { tri, norm, stencil })
    }

    /// Concavity across every interior face plus the dual-norm gradient bound
    /// on every boundary simplex.
    pub fn membership(&self, f: &[f64], tol: f64) -> KSetCheck {
        let tri = self.tri;
        let grads: Vec<Vec<f64>> = (0..tri.num_simplices()).map(|j| tri.pl_gradient_of(j, f)).collect();
        let mut worst_concavity = f64::NEG_INFINITY;
        for face in tri.interior_faces() {
            let jump: Vec<f64> = grads[face.j2].iter().zip(&grads[face.j1]).map(|(a, b)| a - b).collect();
            worst_concavity = worst_concavity.max(dot(&jump, &face.normal));
        }
        let worst_gradient =
            tri.boundary_simplices().iter().map(|&j| self.norm.dual_norm(&grads[j])).fold(f64::NEG_INFINITY, f64::max);
        KSetCheck {
            member: worst_concavity <= tol && worst_gradient <= 1.0 + tol,
            constraints: tri.interior_faces().len() + tri.boundary_simplices().len(),
            worst_concavity,
            worst_gradient,
        }
    }

    pub fn is_member(&self, f: &[f64]) -> bool {
        self.membership(f, 1e-9).member
    }

    /// Randomized test of the defining inequality over `trials` sampled
    /// tuples; `false` iff some tuple violates it by more than `1e-9`.
    pub fn sampled_check(&self, f: &[f64], trials: usize, seed: u64) -> Result<bool> {
        if trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let tuple = self.sample_tuple(&mut rng);
            if self.violation(f, &tuple) > 1e-9 {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn violation(&self, f: &[f64], tuple: &Tuple) -> f64 {
        let tri = self.tri;
        let eval = |(j, alpha): &(usize, Vec<f64>)| -> f64 {
            tri.simplex(*j).iter().zip(alpha).map(|(&k, a)| a * f[k]).sum()
        };
        let pos: Vec<Vec<f64>> = tuple.points.iter().map(|(j, a)| tri.point_from_bary(*j, a)).collect();
        let f0 = eval(&tuple.points[0]);
        let mut lhs = 0.0;
        let mut sum = vec![0.0; tri.dim()];
        for l in 1..tuple.points.len() {
            lhs += eval(&tuple.points[l]) - f0;
            for (acc, (a, b)) in sum.iter_mut().zip(pos[l].iter().zip(&pos[0])) {
                *acc += a - b;
            }
        }
        lhs - self.norm.norm(&sum)
    }

    fn random_point(&self, rng: &mut ChaCha8Rng) -> (usize, Vec<f64>) {
        let j = rng.gen_range(0..self.tri.num_simplices());
        (j, random_simplex_weights(self.tri.dim() + 1, rng))
    }

    fn locate_point(&self, z: &[f64]) -> (usize, Vec<f64>) {
        let j = self.tri.locate(z).expect("convex combination of label-space points stays inside");
        let alpha = self.tri.barycentric(j, z).expect("valid simplex");
        (j, alpha)
    }

    /// Draws `(j_l, alpha^l)` from a mixture of probes: independent points,
    /// repeated points (Lipschitz direction), vertex pairs of one simplex, and
    /// midpoints of pairs straddling an interior face (concavity).
    fn sample_tuple(&self, rng: &mut ChaCha8Rng) -> Tuple {
        let m = self.stencil;
        let tri = self.tri;
        let n_patterns = if m >= 2 { 6 } else { 4 };
        let points = match rng.gen_range(0..n_patterns) {
            0 => (0..=m).map(|_| self.random_point(rng)).collect(),
            1 => {
                let t0 = self.random_point(rng);
                let t1 = self.random_point(rng);
                std::iter::once(t0).chain(std::iter::repeat(t1).take(m)).collect()
            }
            2 => {
                let j = rng.gen_range(0..tri.num_simplices());
                let t0 = (j, random_simplex_weights(tri.dim() + 1, rng));
                let t1 = (j, random_simplex_weights(tri.dim() + 1, rng));
                std::iter::once(t0).chain(std::iter::repeat(t1).take(m)).collect()
            }
            3 => {
                let j = rng.gen_range(0..tri.num_simplices());
                let mut slots: Vec<usize> = (0..=tri.dim()).collect();
                slots.shuffle(rng);
                let one_hot = |r: usize| -> Vec<f64> { (0..=tri.dim()).map(|q| if q == r { 1.0 } else { 0.0 }).collect() };
                let t0 = (j, one_hot(slots[0]));
                let t1 = (j, one_hot(slots[1]));
                std::iter::once(t0).chain(std::iter::repeat(t1).take(m)).collect()
            }
            4 if !tri.interior_faces().is_empty() => {
                let face = &tri.interior_faces()[rng.gen_range(0..tri.interior_faces().len())];
                let eps = 10f64.powf(rng.gen_range(-4.0..-0.3));
                let on_face = random_simplex_weights(tri.dim(), rng);
                let near = |j: usize, other: usize| -> (usize, Vec<f64>) {
                    // shared vertices get the face weights, the opposite vertex eps
                    let shared: Vec<usize> = tri.simplex(j).iter().copied().filter(|k| tri.simplex(other).contains(k)).collect();
                    let alpha = tri
                        .simplex(j)
                        .iter()
                        .map(|k| match shared.iter().position(|s| s == k) {
                            Some(pos) => (1.0 - eps) * on_face[pos],
                            None => eps,
                        })
                        .collect();
                    (j, alpha)
                };
                self.midpoint_tuple(near(face.j1, face.j2), near(face.j2, face.j1))
            }
            _ => {
                let a = self.random_point(rng);
                let b = self.random_point(rng);
                self.midpoint_tuple(a, b)
            }
        };
        Tuple { points }
    }

    fn midpoint_tuple(&self, a: (usize, Vec<f64>), b: (usize, Vec<f64>)) -> Vec<(usize, Vec<f64>)> {
        let za = self.tri.point_from_bary(a.0, &a.1);
        let zb = self.tri.point_from_bary(b.0, &b.1);
        let mid: Vec<f64> = za.iter().zip(&zb).map(|(x, y)| 0.5 * (x + y)).collect();
        let t0 = self.locate_point(&mid);
        let mut pts = vec![t0.clone(), a, b];
        while pts.len() < self.stencil + 1 {
            pts.push(t0.clone());
        }
        pts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_examples() {
        let tri = Triangulation::interval(-1.0, 1.0, 3).unwrap();
        let spec = KSetSpec::new(&tri, KSetNorm::OneNorm, 2).unwrap();
        assert!(spec.is_member(&[-1.0, 0.0, -1.0]));
        let steep = spec.membership(&[0.0, 1.5, 0.0], 1e-9);
        assert!(!steep.member && (steep.worst_gradient - 1.5).abs() < 1e-12);
        let valley = spec.membership(&[0.0, -1.0, 0.0], 1e-9);
        assert!(!valley.member && valley.worst_concavity > 0.0);
        assert!(steep.constraints <= tri.num_faces());
    }

    #[test]
    fn sampled_examples() {
        let tri = Triangulation::interval(-1.0, 1.0, 3).unwrap();
        let spec1 = KSetSpec::new(&tri, KSetNorm::OneNorm, 1).unwrap();
        assert!(!spec1.sampled_check(&[0.0, 1.5, 0.0], 1000, 1).unwrap());
        assert!(spec1.sampled_check(&[2.0, 2.0, 2.0], 1000, 1).unwrap());
        let spec2 = KSetSpec::new(&tri, KSetNorm::OneNorm, 2).unwrap();
        assert!(spec2.sampled_check(&[-1.0, 0.0, -1.0], 2000, 2).unwrap());
        assert!(!spec2.sampled_check(&[0.0, -1.0, 0.0], 2000, 2).unwrap());
        assert!(spec2.sampled_check(&[0.0], 0, 0).is_err());
    }
}
