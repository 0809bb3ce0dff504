//! Sample distance matrices and the local-scale affinity kernel
//! `A(j, n) = exp(-d² / (0.5·σ_j·σ_n + 0.5·d))`, where `σ_j` is the mean
//! distance from `j` to its `k1` nearest neighbours.

use rayon::prelude::*;

use crate::error::{OmicsError, Result};
use crate::numkernel::RealMatrix;
use crate::preprocess::OmicsMatrix;

/// Symmetric, nonnegative, finite, zero-diagonal `n×n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: RealMatrix,
}

impl DistanceMatrix {
    /// Validates `values`; asymmetry up to `1e-12` relative is averaged away.
    pub fn new(values: RealMatrix) -> Result<Self> {
        if !values.is_square() || values.rows() == 0 {
            return Err(OmicsError::Argument(format!(
                "distance matrix must be square and nonempty, got {:?}",
                values.shape()
            )));
        }
        if !values.is_finite() {
            return Err(OmicsError::Numerical("distance matrix is not finite".into()));
        }
        let n = values.rows();
        let scale = values.max_abs().max(1.0);
        for i in 0..n {
            if values[(i, i)] != 0.0 {
                return Err(OmicsError::Argument(format!("distance d[{i},{i}] is not zero")));
            }
            for j in 0..n {
                if values[(i, j)] < 0.0 {
                    return Err(OmicsError::Argument(format!("distance d[{i},{j}] is negative")));
                }
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-12 * scale {
                    return Err(OmicsError::Argument(format!(
                        "distance matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            values: values.symmetrized(),
        })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn as_matrix(&self) -> &RealMatrix {
        &self.values
    }

    /// Each row's off-diagonal distances in ascending order (`n−1` per row).
    pub fn sorted_neighbor_distances(&self) -> Vec<Vec<f64>> {
        (0..self.n())
            .into_par_iter()
            .map(|j| {
                let mut row: Vec<f64> = self
                    .values
                    .row(j)
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != j)
                    .map(|(_, &d)| d)
                    .collect();
                row.sort_by(f64::total_cmp);
                row
            })
            .collect()
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        let v = &self.values;
        Self {
            values: RealMatrix::from_fn(order.len(), order.len(), |i, j| v[(order[i], order[j])]),
        }
    }
}

/// Symmetric `n×n` similarity with entries in `(0, 1]` and a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    values: RealMatrix,
}

impl AffinityMatrix {
    pub fn new(values: RealMatrix) -> Result<Self> {
        if !values.is_square() || values.rows() == 0 {
            return Err(OmicsError::Argument(format!(
                "affinity matrix must be square and nonempty, got {:?}",
                values.shape()
            )));
        }
        let n = values.rows();
        for i in 0..n {
            if values[(i, i)] != 1.0 {
                return Err(OmicsError::Argument(format!("affinity A[{i},{i}] is not 1")));
            }
            for j in 0..n {
                let a = values[(i, j)];
                if !(a > 0.0 && a <= 1.0) {
                    return Err(OmicsError::Argument(format!(
                        "affinity A[{i},{j}] = {a} is outside (0, 1]"
                    )));
                }
                if (a - values[(j, i)]).abs() > 1e-12 {
                    return Err(OmicsError::Argument(format!(
                        "affinity matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    pub fn as_matrix(&self) -> &RealMatrix {
        &self.values
    }

    pub fn into_matrix(self) -> RealMatrix {
        self.values
    }

    pub fn permuted(&self, order: &[usize]) -> Self {
        let v = &self.values;
        Self {
            values: RealMatrix::from_fn(order.len(), order.len(), |i, j| v[(order[i], order[j])]),
        }
    }
}

/// Pairwise Euclidean distances between the rows of `x`.
pub fn row_distances(x: &RealMatrix) -> DistanceMatrix {
    let n = x.rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        return 0.0;
                    }
                    x.row(i)
                        .iter()
                        .zip(x.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt()
                })
                .collect()
        })
        .collect();
    // Each entry is computed with the same operands in both orders, so the
    // result is exactly symmetric.
    DistanceMatrix {
        values: RealMatrix::from_rows(&rows).expect("rows have equal length"),
    }
}

pub fn euclidean_distance_matrix(x: &OmicsMatrix) -> Result<DistanceMatrix> {
    x.require_complete("euclidean distance")?;
    Ok(row_distances(x.values()))
}

/// Default neighbourhood size for the local scale: `round(sqrt(n))` clamped
/// to `[1, n−1]`.
pub fn default_k1(n: usize) -> usize {
    ((n as f64).sqrt().round() as usize).clamp(1, n.saturating_sub(1).max(1))
}

fn check_k1(n: usize, k1: usize) -> Result<()> {
    if n < 2 || k1 == 0 || k1 > n - 1 {
        return Err(OmicsError::Argument(format!(
            "k1 must lie in [1, n-1], got {k1} with n = {n}"
        )));
    }
    Ok(())
}

/// `σ_j`: mean distance from sample `j` to its `k1` nearest other samples.
pub fn local_scales(d: &DistanceMatrix, k1: usize) -> Result<Vec<f64>> {
    check_k1(d.n(), k1)?;
    Ok(d.sorted_neighbor_distances()
        .iter()
        .map(|row| row[..k1].iter().sum::<f64>() / k1 as f64)
        .collect())
}

pub fn affinity_from_distance(d: &DistanceMatrix, k1: usize) -> Result<AffinityMatrix> {
    let sigma = local_scales(d, k1)?;
    let n = d.n();
    let mut values = RealMatrix::zeros(n, n);
    values
        .as_mut_slice()
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(j, row)| {
            for (m, out) in row.iter_mut().enumerate() {
                *out = if j == m {
                    1.0
                } else {
                    kernel(d.get(j, m), sigma[j], sigma[m])
                };
            }
        });
    Ok(AffinityMatrix { values })
}

fn kernel(d: f64, sigma_j: f64, sigma_n: f64) -> f64 {
    let denom = 0.5 * sigma_j * sigma_n + 0.5 * d;
    if denom == 0.0 {
        // duplicate samples with zero local scale
        return 1.0;
    }
    (-(d * d) / denom).exp().max(f64::MIN_POSITIVE)
}
