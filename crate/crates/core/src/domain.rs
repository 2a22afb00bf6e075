//! Image-domain grids and the finite-difference Laplacian.
//!
//! The stencil sums `u[l] - u[i]` over the existing grid neighbors of `i`.
//! Reflected (mirror) neighbors at the border coincide with the center and
//! drop out, which keeps the operator symmetric with zero row and column sums.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone)]
pub struct Grid {
    shape: Vec<usize>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl Grid {
    /// Grid with shape `(n)` or `(rows, cols)`, row-major point ordering.
    pub fn new(shape: &[usize]) -> Result<Self> {
        if shape.is_empty() || shape.len() > 2 || shape.iter().any(|&n| n == 0) {
            return Err(invalid(format!("grid shape must have 1 or 2 positive extents, got {shape:?}")));
        }
        let (rows, cols) = if shape.len() == 1 { (1, shape[0]) } else { (shape[0], shape[1]) };
        let mut offsets = Vec::with_capacity(rows * cols + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for r in 0..rows {
            for c in 0..cols {
                if shape.len() == 2 && r > 0 {
                    neighbors.push((r - 1) * cols + c);
                }
                if c > 0 {
                    neighbors.push(r * cols + c - 1);
                }
                if c + 1 < cols {
                    neighbors.push(r * cols + c + 1);
                }
                if shape.len() == 2 && r + 1 < rows {
                    neighbors.push((r + 1) * cols + c);
                }
                offsets.push(neighbors.len());
            }
        }
        Ok(Self { shape: shape.to_vec(), offsets, neighbors })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(&[n])
    }

    pub fn image(rows: usize, cols: usize) -> Result<Self> {
        Self::new(&[rows, cols])
    }

    pub fn dims(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    /// `(row, col)` of point `i`; 1D grids have a single row.
    pub fn coords(&self, i: usize) -> (usize, usize) {
        let cols = *self.shape.last().unwrap();
        (i / cols, i % cols)
    }

    /// Applies the stencil channel-wise to a row-major `N x channels` field.
    pub fn laplacian_apply(&self, field: &[f64], channels: usize) -> Result<Vec<f64>> {
        if channels == 0 || field.len() != self.len() * channels {
            return Err(Error::ShapeMismatch(format!(
                "field of length {} is not {} x {channels}",
                field.len(),
                self.len()
            )));
        }
        let mut out = vec![0.0; field.len()];
        self.laplacian_into(field, channels, &mut out);
        Ok(out)
    }

    pub(crate) fn laplacian_into(&self, field: &[f64], channels: usize, out: &mut [f64]) {
        out.par_chunks_mut(channels).enumerate().for_each(|(i, row)| {
            self.laplacian_row(field, channels, i, row);
        });
    }

    /// Row `i` of the Laplacian of `field`, written into `row`.
    #[inline]
    pub(crate) fn laplacian_row(&self, field: &[f64], channels: usize, i: usize, row: &mut [f64]) {
        let center = &field[i * channels..(i + 1) * channels];
        row.iter_mut().for_each(|v| *v = 0.0);
        for &l in self.neighbors(i) {
            let nb = &field[l * channels..(l + 1) * channels];
            for c in 0..channels {
                row[c] += nb[c] - center[c];
            }
        }
    }

    /// Gershgorin bound `2 * max_i m_i` on the operator 2-norm, i.e. `4d` for
    /// any grid with interior points and 0 without neighbors.
    pub fn laplacian_opnorm_bound(&self) -> f64 {
        let max_m = (0..self.len()).map(|i| self.neighbors(i).len()).max().unwrap_or(0);
        if max_m == 0 {
            0.0
        } else {
            4.0 * self.dims() as f64
        }
    }
}
