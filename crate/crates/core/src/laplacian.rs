//! Graph Laplacian of a 4-connected pixel grid, stored as adjacency lists.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LaplacianMatrix {
    height: usize,
    width: usize,
    neighbors: Vec<Vec<usize>>,
}

/// Laplacian of a `height × width` grid in row-major pixel order.
pub fn laplacian_matrix(height: usize, width: usize) -> Result<LaplacianMatrix> {
    if height == 0 || width == 0 {
        return Err(Error::invalid("grid dimensions must be positive"));
    }
    let mut neighbors = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            let mut nb = Vec::with_capacity(4);
            if r > 0 {
                nb.push((r - 1) * width + c);
            }
            if c > 0 {
                nb.push(r * width + c - 1);
            }
            if c + 1 < width {
                nb.push(r * width + c + 1);
            }
            if r + 1 < height {
                nb.push((r + 1) * width + c);
            }
            neighbors.push(nb);
        }
    }
    Ok(LaplacianMatrix {
        height,
        width,
        neighbors,
    })
}

impl LaplacianMatrix {
    pub fn dim(&self) -> usize {
        self.neighbors.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn entry(&self, i: usize, j: usize) -> i64 {
        if i == j {
            self.neighbors[i].len() as i64
        } else if self.neighbors[i].contains(&j) {
            -1
        } else {
            0
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<i64>> {
        let n = self.dim();
        (0..n).map(|i| (0..n).map(|j| self.entry(i, j)).collect()).collect()
    }

    /// `M v` for the first `dim()` entries of `v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.neighbors
            .iter()
            .enumerate()
            .map(|(i, nb)| nb.len() as f64 * v[i] - nb.iter().map(|&j| v[j]).sum::<f64>())
            .collect()
    }

    /// `vᵀ M v` over the first `dim()` entries of `v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        self.apply(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }
}
