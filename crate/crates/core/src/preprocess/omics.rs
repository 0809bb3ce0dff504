use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{OmicsError, Result};
use crate::numkernel::RealMatrix;

/// Molecular assay an [`OmicsMatrix`] was measured with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmicsKind {
    GeneExpression,
    Mirna,
    Methylation,
    Other,
}

impl OmicsKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OmicsKind::GeneExpression => "gene_expression",
            OmicsKind::Mirna => "mirna",
            OmicsKind::Methylation => "methylation",
            OmicsKind::Other => "other",
        }
    }
}

impl fmt::Display for OmicsKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for OmicsKind {
    type Err = OmicsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gene_expression" => Ok(OmicsKind::GeneExpression),
            "mirna" => Ok(OmicsKind::Mirna),
            "methylation" => Ok(OmicsKind::Methylation),
            "other" => Ok(OmicsKind::Other),
            _ => Err(OmicsError::Argument(format!("unknown omics kind `{s}`"))),
        }
    }
}

/// Samples × features measurements from one assay.
///
/// Missing cells hold `NaN` in `values` and `true` in the mask; every other
/// cell is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct OmicsMatrix {
    values: RealMatrix,
    sample_ids: Vec<String>,
    feature_ids: Vec<String>,
    kind: OmicsKind,
    missing: Vec<bool>,
}

impl OmicsMatrix {
    /// Builds a matrix; `NaN` cells are taken as missing.
    pub fn new(
        values: RealMatrix,
        sample_ids: Vec<String>,
        feature_ids: Vec<String>,
        kind: OmicsKind,
    ) -> Result<Self> {
        let (n, p) = values.shape();
        if n == 0 || p == 0 {
            return Err(OmicsError::EmptyDataset(format!(
                "{kind} matrix has shape {n}x{p}"
            )));
        }
        if sample_ids.len() != n || feature_ids.len() != p {
            return Err(OmicsError::Argument(format!(
                "{kind}: {} sample ids and {} feature ids for a {n}x{p} matrix",
                sample_ids.len(),
                feature_ids.len()
            )));
        }
        ensure_unique(&sample_ids, "sample")?;
        ensure_unique(&feature_ids, "feature")?;
        if let Some(v) = values.as_slice().iter().find(|v| v.is_infinite()) {
            return Err(OmicsError::Argument(format!(
                "{kind} matrix contains non-finite value {v}"
            )));
        }
        let missing = values.as_slice().iter().map(|v| v.is_nan()).collect();
        Ok(Self {
            values,
            sample_ids,
            feature_ids,
            kind,
            missing,
        })
    }

    pub(crate) fn with_values(&self, values: RealMatrix) -> Self {
        let missing = values.as_slice().iter().map(|v| v.is_nan()).collect();
        Self {
            values,
            sample_ids: self.sample_ids.clone(),
            feature_ids: self.feature_ids.clone(),
            kind: self.kind,
            missing,
        }
    }

    pub fn values(&self) -> &RealMatrix {
        &self.values
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn kind(&self) -> OmicsKind {
        self.kind
    }

    pub fn n_samples(&self) -> usize {
        self.values.rows()
    }

    pub fn n_features(&self) -> usize {
        self.values.cols()
    }

    #[inline]
    pub fn is_missing(&self, sample: usize, feature: usize) -> bool {
        self.missing[sample * self.n_features() + feature]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub(crate) fn require_complete(&self, op: &str) -> Result<()> {
        if self.has_missing() {
            return Err(OmicsError::Argument(format!(
                "{op} needs a complete {} matrix, found {} missing cells",
                self.kind,
                self.missing_count()
            )));
        }
        Ok(())
    }

    /// Keeps the listed features, in the given order.
    pub fn select_features(&self, indices: &[usize]) -> Self {
        let values = self.values.select_cols(indices);
        let feature_ids = indices.iter().map(|&j| self.feature_ids[j].clone()).collect();
        Self {
            missing: values.as_slice().iter().map(|v| v.is_nan()).collect(),
            values,
            sample_ids: self.sample_ids.clone(),
            feature_ids,
            kind: self.kind,
        }
    }

    /// Keeps the listed samples, in the given order.
    pub fn select_samples(&self, indices: &[usize]) -> Self {
        let values = self.values.select_rows(indices);
        let sample_ids = indices.iter().map(|&i| self.sample_ids[i].clone()).collect();
        Self {
            missing: values.as_slice().iter().map(|v| v.is_nan()).collect(),
            values,
            sample_ids,
            feature_ids: self.feature_ids.clone(),
            kind: self.kind,
        }
    }
}

fn ensure_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(OmicsError::Argument(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn nan_cells_become_missing() {
        let v = RealMatrix::from_rows(&[[1.0, f64::NAN], [2.0, 3.0]]).unwrap();
        let m = OmicsMatrix::new(v, ids("s", 2), ids("f", 2), OmicsKind::Mirna).unwrap();
        assert!(m.is_missing(0, 1));
        assert!(!m.is_missing(1, 1));
        assert_eq!(m.missing_count(), 1);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let v = RealMatrix::zeros(2, 1);
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(OmicsMatrix::new(v, dup, ids("f", 1), OmicsKind::Other).is_err());
    }

    #[test]
    fn kind_round_trips_through_str() {
        for k in [
            OmicsKind::GeneExpression,
            OmicsKind::Mirna,
            OmicsKind::Methylation,
            OmicsKind::Other,
        ] {
            assert_eq!(k.as_str().parse::<OmicsKind>().unwrap(), k);
        }
    }
}

/// Checks that `other` lists exactly the samples of `reference` in the same
/// order. The error names every identifier that is absent from one side or
/// sits at a different position.
pub fn check_sample_alignment(reference: &[String], other: &[String]) -> Result<()> {
    if reference == other {
        return Ok(());
    }
    let ref_set: std::collections::HashSet<&String> = reference.iter().collect();
    let other_set: std::collections::HashSet<&String> = other.iter().collect();
    let mut offending: Vec<String> = reference
        .iter()
        .filter(|id| !other_set.contains(id))
        .chain(other.iter().filter(|id| !ref_set.contains(id)))
        .cloned()
        .collect();
    if offending.is_empty() {
        offending = reference
            .iter()
            .zip(other)
            .filter(|(a, b)| a != b)
            .map(|(a, _)| a.clone())
            .collect();
    }
    Err(OmicsError::Alignment(offending))
}
