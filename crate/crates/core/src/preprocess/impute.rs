use serde::Serialize;

use super::OmicsMatrix;
use crate::error::{OmicsError, Result};
use crate::numkernel::RealMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImputeReport {
    pub k: usize,
    pub imputed_cells: usize,
}

/// `round(√n)`, the customary neighbourhood size for KNN imputation.
pub fn default_impute_k(n: usize) -> usize {
    (n as f64).sqrt().round() as usize
}

/// Fills each missing cell with the mean of that feature over the `k`
/// nearest samples observing it. `k = None` uses [`default_impute_k`],
/// clipped to `n - 1`.
///
/// Distances use only coordinates observed in both samples, rescaled by
/// `sqrt(p / shared)`.
pub fn knn_impute(x: &OmicsMatrix, k: Option<usize>) -> Result<(OmicsMatrix, ImputeReport)> {
    let n = x.n_samples();
    let p = x.n_features();
    let k = k.unwrap_or_else(|| default_impute_k(n).min(n.saturating_sub(1)));
    if k < 2 || k + 1 > n {
        return Err(OmicsError::Argument(format!(
            "imputation needs 2 <= k <= n - 1, got k = {k} with n = {n}"
        )));
    }
    for i in 0..n {
        if (0..p).all(|f| x.is_missing(i, f)) {
            return Err(OmicsError::Argument(format!(
                "sample `{}` has no observed {} values",
                x.sample_ids()[i],
                x.kind()
            )));
        }
    }
    for f in 0..p {
        if (0..n).all(|i| x.is_missing(i, f)) {
            return Err(OmicsError::UnimputableFeature(x.feature_ids()[f].clone()));
        }
    }

    let report_k = k;
    if !x.has_missing() {
        return Ok((
            x.clone(),
            ImputeReport {
                k: report_k,
                imputed_cells: 0,
            },
        ));
    }

    let dist = masked_distances(x);
    let mut out: RealMatrix = x.values().clone();
    let mut imputed = 0;
    for i in 0..n {
        let missing_here: Vec<usize> = (0..p).filter(|&f| x.is_missing(i, f)).collect();
        if missing_here.is_empty() {
            continue;
        }
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dist[(i, a)].total_cmp(&dist[(i, b)]).then(a.cmp(&b)));
        for f in missing_here {
            let donors: Vec<f64> = order
                .iter()
                .filter(|&&j| !x.is_missing(j, f) && dist[(i, j)].is_finite())
                .take(k)
                .map(|&j| x.values()[(j, f)])
                .collect();
            let value = if donors.is_empty() {
                // no comparable donor: fall back to the observed feature mean
                let observed: Vec<f64> = (0..n)
                    .filter(|&j| !x.is_missing(j, f))
                    .map(|j| x.values()[(j, f)])
                    .collect();
                observed.iter().sum::<f64>() / observed.len() as f64
            } else {
                donors.iter().sum::<f64>() / donors.len() as f64
            };
            out[(i, f)] = value;
            imputed += 1;
        }
    }
    Ok((
        x.with_values(out),
        ImputeReport {
            k: report_k,
            imputed_cells: imputed,
        },
    ))
}

/// Pairwise distances over jointly observed coordinates; `inf` when two
/// samples share none.
pub(crate) fn masked_distances(x: &OmicsMatrix) -> RealMatrix {
    let n = x.n_samples();
    let p = x.n_features();
    let mut d = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let mut sum = 0.0;
            let mut shared = 0usize;
            for f in 0..p {
                if x.is_missing(i, f) || x.is_missing(j, f) {
                    continue;
                }
                let diff = x.values()[(i, f)] - x.values()[(j, f)];
                sum += diff * diff;
                shared += 1;
            }
            let value = if shared == 0 {
                f64::INFINITY
            } else {
                (sum * p as f64 / shared as f64).sqrt()
            };
            d[(i, j)] = value;
            d[(j, i)] = value;
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preprocess::OmicsKind;

    fn omics(rows: &[&[f64]]) -> OmicsMatrix {
        let v = RealMatrix::from_rows(rows).unwrap();
        let (n, p) = v.shape();
        OmicsMatrix::new(
            v,
            (0..n).map(|i| format!("s{i}")).collect(),
            (0..p).map(|j| format!("f{j}")).collect(),
            OmicsKind::GeneExpression,
        )
        .unwrap()
    }

    #[test]
    fn default_k_for_323_samples_is_18() {
        assert_eq!(default_impute_k(323), 18);
    }

    #[test]
    fn constant_neighbourhood_imputes_that_constant() {
        let nan = f64::NAN;
        let x = omics(&[&[0.0, nan], &[0.1, 7.0], &[0.2, 7.0], &[5.0, 1.0]]);
        let (out, report) = knn_impute(&x, Some(2)).unwrap();
        assert_eq!(out.values()[(0, 1)], 7.0);
        assert_eq!(report.imputed_cells, 1);
        assert!(!out.has_missing());
    }

    #[test]
    fn four_sample_toy_matches_enumerated_distances() {
        let nan = f64::NAN;
        let rows: [[f64; 3]; 4] = [
            [1.0, 2.0, nan],
            [1.5, 2.5, 10.0],
            [4.0, 0.0, 20.0],
            [1.2, 1.0, 40.0],
        ];
        let x = omics(&rows.iter().map(|r| &r[..]).collect::<Vec<_>>());
        // hand table: sample 0 shares features 0 and 1 with everyone, p/shared = 3/2
        let mut table: Vec<(f64, usize)> = (1..4)
            .map(|j| {
                let ss: f64 = (0..2).map(|f| (rows[0][f] - rows[j][f]).powi(2)).sum();
                ((ss * 1.5).sqrt(), j)
            })
            .collect();
        table.sort_by(|a, b| a.0.total_cmp(&b.0));
        let expected = (rows[table[0].1][2] + rows[table[1].1][2]) / 2.0;
        // nearest two are samples 1 and 3
        assert_eq!((table[0].1, table[1].1), (1, 3));
        let (out, _) = knn_impute(&x, Some(2)).unwrap();
        assert!((out.values()[(0, 2)] - expected).abs() < 1e-12);
        assert!((out.values()[(0, 2)] - 25.0).abs() < 1e-12);
    }

    #[test]
    fn observed_cells_untouched() {
        let nan = f64::NAN;
        let x = omics(&[
            &[1.0, nan, 3.0],
            &[nan, 2.0, 1.0],
            &[0.5, 0.5, nan],
            &[2.0, 1.0, 1.0],
        ]);
        let (out, _) = knn_impute(&x, Some(2)).unwrap();
        for i in 0..4 {
            for f in 0..3 {
                if !x.is_missing(i, f) {
                    assert_eq!(out.values()[(i, f)], x.values()[(i, f)]);
                }
            }
        }
        assert!(out.values().is_finite());
    }

    #[test]
    fn unobserved_feature_is_named() {
        let nan = f64::NAN;
        let x = omics(&[&[1.0, nan], &[2.0, nan], &[3.0, nan]]);
        match knn_impute(&x, Some(2)) {
            Err(OmicsError::UnimputableFeature(f)) => assert_eq!(f, "f1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn k_range_checked() {
        let x = omics(&[&[1.0], &[2.0], &[3.0]]);
        assert!(knn_impute(&x, Some(1)).is_err());
        assert!(knn_impute(&x, Some(3)).is_err());
        assert!(knn_impute(&x, Some(2)).is_ok());
    }
}
