use serde::Serialize;

use super::OmicsMatrix;
use crate::error::{OmicsError, Result};

/// Default upper bound on the fraction of zero or missing cells per feature.
pub const DEFAULT_ZERO_FRACTION: f64 = 0.20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterReport {
    pub threshold: f64,
    pub removed: Vec<String>,
    pub retained: usize,
}

/// Drops features whose share of exact zeros plus missing cells exceeds
/// `threshold`. Feature order is preserved.
pub fn filter_sparse_features(
    x: &OmicsMatrix,
    threshold: f64,
) -> Result<(OmicsMatrix, FilterReport)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(OmicsError::Argument(format!(
            "zero-fraction threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let n = x.n_samples();
    let mut keep = Vec::with_capacity(x.n_features());
    let mut removed = Vec::new();
    for f in 0..x.n_features() {
        let sparse = (0..n)
            .filter(|&i| x.is_missing(i, f) || x.values()[(i, f)] == 0.0)
            .count();
        if sparse as f64 / n as f64 > threshold {
            removed.push(x.feature_ids()[f].clone());
        } else {
            keep.push(f);
        }
    }
    if keep.is_empty() {
        return Err(OmicsError::EmptyDataset(format!(
            "every {} feature has more than {:.0}% zeros or missing values",
            x.kind(),
            threshold * 100.0
        )));
    }
    let report = FilterReport {
        threshold,
        removed,
        retained: keep.len(),
    };
    Ok((x.select_features(&keep), report))
}
