use super::OmicsMatrix;
use crate::error::{OmicsError, Result};

/// Columns whose sample standard deviation falls below this are constant.
const CONSTANT_SD: f64 = 1e-12;

/// Centres each feature and scales it to unit sample (`n - 1`) standard
/// deviation. Constant features are dropped; their ids are returned.
pub fn zscore_standardize(x: &OmicsMatrix) -> Result<(OmicsMatrix, Vec<String>)> {
    x.require_complete("z-score standardization")?;
    let n = x.n_samples();
    if n < 2 {
        return Err(OmicsError::Argument(
            "z-score needs at least two samples".into(),
        ));
    }
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    let mut stats = Vec::new();
    for f in 0..x.n_features() {
        let col = x.values().col(f);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        if sd < CONSTANT_SD * mean.abs().max(1.0) {
            dropped.push(x.feature_ids()[f].clone());
        } else {
            keep.push(f);
            stats.push((mean, sd));
        }
    }
    if keep.is_empty() {
        return Err(OmicsError::EmptyDataset(format!(
            "every {} feature is constant",
            x.kind()
        )));
    }
    let mut out = x.select_features(&keep);
    let mut values = out.values().clone();
    for i in 0..n {
        for (v, &(mean, sd)) in values.row_mut(i).iter_mut().zip(&stats) {
            *v = (*v - mean) / sd;
        }
    }
    out = out.with_values(values);
    Ok((out, dropped))
}
