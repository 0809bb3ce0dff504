use crate::error::{OmicsError, Result};

use super::RealMatrix;

const MAX_SWEEPS: usize = 100;
const ROTATION_TOL: f64 = 1e-12;

/// Thin singular value decomposition `A = U · diag(s) · Vᵀ`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `rows × r` with orthonormal columns.
    pub u: RealMatrix,
    /// `r` singular values, descending and nonnegative.
    pub singular_values: Vec<f64>,
    /// `r × cols` with orthonormal rows.
    pub vt: RealMatrix,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Number of singular values above `rel_tol · s_max`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let smax = self.singular_values.first().copied().unwrap_or(0.0);
        if smax <= 0.0 {
            return 0;
        }
        self.singular_values
            .iter()
            .take_while(|&&s| s > rel_tol * smax)
            .count()
    }

    pub fn reconstruct(&self) -> RealMatrix {
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for (v, s) in us.row_mut(i).iter_mut().zip(&self.singular_values) {
                *v *= s;
            }
        }
        us.matmul(&self.vt).expect("factor shapes agree")
    }
}

/// Thin SVD by one-sided (Hestenes) Jacobi rotations; `r = min(rows, cols)`.
pub fn svd_thin(a: &RealMatrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(OmicsError::Argument(format!(
            "svd of an empty {m}x{n} matrix"
        )));
    }
    if !a.is_finite() {
        return Err(OmicsError::Argument(format!(
            "svd input {m}x{n} contains non-finite entries"
        )));
    }
    if m >= n {
        let (u_cols, s, v_cols) = jacobi_tall(a)?;
        Ok(assemble(m, n, u_cols, s, v_cols))
    } else {
        // A = (Aᵀ)ᵀ = (U' S V'ᵀ)ᵀ = V' S U'ᵀ
        let (u_cols, s, v_cols) = jacobi_tall(&a.transpose())?;
        Ok(assemble(m, n, v_cols, s, u_cols))
    }
}

fn assemble(
    m: usize,
    n: usize,
    u_cols: Vec<Vec<f64>>,
    s: Vec<f64>,
    v_cols: Vec<Vec<f64>>,
) -> SvdFactors {
    let r = s.len();
    let u = RealMatrix::from_fn(m, r, |i, j| u_cols[j][i]);
    let vt = RealMatrix::from_fn(r, n, |i, j| v_cols[i][j]);
    SvdFactors {
        u,
        singular_values: s,
        vt,
    }
}

type Columns = Vec<Vec<f64>>;

/// One-sided Jacobi on a matrix with `rows >= cols`. Returns left singular
/// columns, singular values and right singular columns, sorted descending.
fn jacobi_tall(a: &RealMatrix) -> Result<(Columns, Vec<f64>, Columns)> {
    let (m, n) = a.shape();
    let mut w: Columns = (0..n).map(|j| a.col(j)).collect();
    let mut v: Columns = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let scale = a.frobenius_norm();
    // columns below this squared norm carry no signal worth rotating
    let negligible = (f64::EPSILON * scale).powi(2);

    let mut converged = n == 1 || scale == 0.0;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(OmicsError::Numerical(format!(
                "one-sided Jacobi SVD of a {m}x{n} matrix did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        converged = true;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (wp, wq) = (&w[p], &w[q]);
                    let mut alpha = 0.0;
                    let mut beta = 0.0;
                    let mut gamma = 0.0;
                    for (x, y) in wp.iter().zip(wq) {
                        alpha += x * x;
                        beta += y * y;
                        gamma += x * y;
                    }
                    (alpha, beta, gamma)
                };
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                if gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
    }

    let norms: Vec<f64> = w
        .iter()
        .map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let smax = norms[order[0]];
    let zero_tol = (m.max(n) as f64) * f64::EPSILON * smax;
    let mut u_cols: Columns = Vec::with_capacity(n);
    let mut pending = Vec::new();
    let mut s = Vec::with_capacity(n);
    let mut v_sorted = Vec::with_capacity(n);
    for &j in &order {
        let sigma = norms[j];
        s.push(sigma);
        v_sorted.push(v[j].clone());
        if sigma > zero_tol && sigma > 0.0 {
            u_cols.push(w[j].iter().map(|x| x / sigma).collect());
        } else {
            pending.push(u_cols.len());
            u_cols.push(Vec::new());
        }
    }
    complete_orthonormal(&mut u_cols, &pending, m);
    Ok((u_cols, s, v_sorted))
}

#[inline]
fn rotate(cols: &mut Columns, p: usize, q: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(q);
    let (cp, cq) = (&mut left[p], &mut right[0]);
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the `pending` slots with unit vectors orthogonal to every other column.
fn complete_orthonormal(cols: &mut Columns, pending: &[usize], m: usize) {
    let mut basis_idx = 0;
    for &slot in pending {
        loop {
            assert!(basis_idx < m, "ran out of basis vectors completing U");
            let mut e = vec![0.0; m];
            e[basis_idx] = 1.0;
            basis_idx += 1;
            // two Gram-Schmidt passes
            for _ in 0..2 {
                for (k, col) in cols.iter().enumerate() {
                    if k == slot || col.is_empty() {
                        continue;
                    }
                    let dot: f64 = e.iter().zip(col).map(|(a, b)| a * b).sum();
                    for (x, c) in e.iter_mut().zip(col) {
                        *x -= dot * c;
                    }
                }
            }
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                cols[slot] = e.into_iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}
