use crate::error::{OmicsError, Result};

use super::RealMatrix;

/// Which end of the spectrum to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenWhich {
    Smallest,
    Largest,
}

/// `c` eigenpairs of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, ascending for [`EigenWhich::Smallest`], descending for
    /// [`EigenWhich::Largest`].
    pub values: Vec<f64>,
    /// `n × c`, column `i` pairs with `values[i]`.
    pub vectors: RealMatrix,
}

/// Eigendecomposition of the symmetric part `(A + Aᵀ)/2` of `a`.
///
/// Householder reduction to tridiagonal form followed by the implicit QL
/// algorithm with Wilkinson-style shifts.
pub fn sym_eig(a: &RealMatrix, c: usize, which: EigenWhich) -> Result<SymEigen> {
    let n = a.rows();
    if !a.is_square() {
        return Err(OmicsError::Argument(format!(
            "sym_eig needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if c == 0 || c > n {
        return Err(OmicsError::Argument(format!(
            "requested {c} eigenpairs of a {n}x{n} matrix"
        )));
    }
    if !a.is_finite() {
        return Err(OmicsError::Argument("sym_eig input is not finite".into()));
    }
    let (values, vt) = full_decomposition(&a.symmetrized())?;
    // `values` ascending; row i of `vt` is the eigenvector of values[i]
    let picks: Vec<usize> = match which {
        EigenWhich::Smallest => (0..c).collect(),
        EigenWhich::Largest => (0..c).map(|i| n - 1 - i).collect(),
    };
    let vectors = RealMatrix::from_fn(n, c, |i, j| vt[(picks[j], i)]);
    Ok(SymEigen {
        values: picks.iter().map(|&i| values[i]).collect(),
        vectors,
    })
}

/// Returns ascending eigenvalues and a matrix whose rows are the matching
/// unit eigenvectors.
fn full_decomposition(a: &RealMatrix) -> Result<(Vec<f64>, RealMatrix)> {
    let n = a.rows();
    let mut v = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    let mut vt = v.transpose();
    implicit_ql(&mut vt, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let sorted = vt.select_rows(&order);
    Ok((values, sorted))
}

/// Householder tridiagonalization; on return `v` holds the accumulated
/// orthogonal transform, `d` the diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize(v: &mut RealMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let scale: f64 = d[..i].iter().map(|x| x.abs()).sum();
        let mut h = 0.0;
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d[..i].iter_mut() {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e[..i].iter_mut() {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`. `vt` holds eigenvectors as rows.
fn implicit_ql(vt: &mut RealMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let max_iter = 60 * n.max(1);
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > max_iter {
                    return Err(OmicsError::Numerical(format!(
                        "symmetric eigensolver did not converge for a {n}x{n} matrix"
                    )));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in d[l + 2..].iter_mut() {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    rotate_rows(vt, i, i + 1, c, s);
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

#[inline]
fn rotate_rows(vt: &mut RealMatrix, i: usize, j: usize, c: f64, s: f64) {
    let cols = vt.cols();
    let data = vt.as_mut_slice();
    let (head, tail) = data.split_at_mut(j * cols);
    let ri = &mut head[i * cols..(i + 1) * cols];
    let rj = &mut tail[..cols];
    for (a, b) in ri.iter_mut().zip(rj.iter_mut()) {
        let h = *b;
        *b = s * *a + c * h;
        *a = c * *a - s * h;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> RealMatrix {
        let a = RealMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        a.symmetrized()
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    fn det(mut m: RealMatrix) -> f64 {
        let n = m.rows();
        let mut det = 1.0;
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&a, &b| m[(a, col)].abs().total_cmp(&m[(b, col)].abs()))
                .unwrap();
            if m[(piv, col)] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for j in 0..n {
                    let t = m[(piv, j)];
                    m[(piv, j)] = m[(col, j)];
                    m[(col, j)] = t;
                }
                det = -det;
            }
            det *= m[(col, col)];
            for r in col + 1..n {
                let factor = m[(r, col)] / m[(col, col)];
                for j in col..n {
                    let v = m[(col, j)];
                    m[(r, j)] -= factor * v;
                }
            }
        }
        det
    }

    /// Roots of det(A - λI) by sign-change scan plus bisection.
    fn char_poly_roots(a: &RealMatrix) -> Vec<f64> {
        let n = a.rows();
        let bound = (0..n)
            .map(|i| (0..n).map(|j| a[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
            + 1.0;
        let p = |lam: f64| {
            let mut m = a.clone();
            for i in 0..n {
                m[(i, i)] -= lam;
            }
            det(m)
        };
        let steps = 20_000;
        let mut roots = Vec::new();
        let mut lo = -bound;
        let mut plo = p(lo);
        for k in 1..=steps {
            let hi = -bound + 2.0 * bound * k as f64 / steps as f64;
            let phi = p(hi);
            if plo == 0.0 {
                roots.push(lo);
            } else if plo.signum() != phi.signum() {
                let (mut a0, mut b0, mut pa) = (lo, hi, plo);
                for _ in 0..200 {
                    let mid = 0.5 * (a0 + b0);
                    let pm = p(mid);
                    if pm.signum() == pa.signum() {
                        a0 = mid;
                        pa = pm;
                    } else {
                        b0 = mid;
                    }
                }
                roots.push(0.5 * (a0 + b0));
            }
            lo = hi;
            plo = phi;
        }
        roots
    }

    #[test]
    fn diagonal_largest_two() {
        let a = RealMatrix::from_diag(&[1.0, 2.0, 3.0]);
        let e = sym_eig(&a, 2, EigenWhich::Largest).unwrap();
        assert_eq!(e.values.len(), 2);
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn identity_single_pair() {
        let e = sym_eig(&RealMatrix::identity(4), 1, EigenWhich::Smallest).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-14);
        let norm: f64 = e.vectors.col(0).iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_many_pairs_rejected() {
        let err = sym_eig(&RealMatrix::identity(3), 4, EigenWhich::Largest);
        assert!(matches!(err, Err(OmicsError::Argument(_))));
        assert!(sym_eig(&RealMatrix::identity(3), 0, EigenWhich::Largest).is_err());
    }

    #[test]
    fn random_6x6_matches_characteristic_polynomial() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let a = random_symmetric(&mut rng, 6);
            let roots = char_poly_roots(&a);
            assert_eq!(roots.len(), 6);
            let e = sym_eig(&a, 6, EigenWhich::Smallest).unwrap();
            for (v, r) in e.values.iter().zip(&roots) {
                assert!((v - r).abs() < 1e-8, "{v} vs {r}");
            }
        }
    }

    #[test]
    fn residuals_and_orthonormality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1, 2, 5, 17, 40] {
            let a = random_symmetric(&mut rng, n);
            let norm = a.frobenius_norm();
            for which in [EigenWhich::Smallest, EigenWhich::Largest] {
                let e = sym_eig(&a, n, which).unwrap();
                let av = a.matmul(&e.vectors).unwrap();
                for j in 0..n {
                    let resid: f64 = (0..n)
                        .map(|i| (av[(i, j)] - e.values[j] * e.vectors[(i, j)]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    assert!(resid <= 1e-8 * norm.max(1.0));
                }
                let g = e.vectors.t_matmul(&e.vectors).unwrap();
                assert!(g.sub(&RealMatrix::identity(n)).unwrap().max_abs() < 1e-10);
                let sorted = e.values.windows(2).all(|w| match which {
                    EigenWhich::Smallest => w[0] <= w[1],
                    EigenWhich::Largest => w[0] >= w[1],
                });
                assert!(sorted);
            }
        }
    }

    #[test]
    fn block_diagonal_degenerate_spectrum() {
        // two identical all-ones blocks: eigenvalue 3 twice, 0 four times
        let a = RealMatrix::from_fn(6, 6, |i, j| if (i < 3) == (j < 3) { 1.0 } else { 0.0 });
        let e = sym_eig(&a, 2, EigenWhich::Largest).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-12 && (e.values[1] - 3.0).abs() < 1e-12);
    }
}
