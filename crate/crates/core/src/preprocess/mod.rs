//! Per-omics preprocessing.
//!
//! The order is fixed: sparse-feature filtering, KNN imputation, Z-score
//! standardization, power transformation, and mixture-based feature
//! selection. [`preprocess_omics`] runs the whole chain and keeps the
//! standardized intermediate, which feeds the intra-dataset affinities.

mod bgmm;
mod filter;
mod impute;
mod omics;
mod power;
mod select;
mod standardize;

use serde::Serialize;

pub use bgmm::{fit_bayesian_gmm, BgmmConfig, BgmmFit, GmmModel, EFFECTIVE_WEIGHT, VARIANCE_FLOOR};
pub use filter::{filter_sparse_features, FilterReport, DEFAULT_ZERO_FRACTION};
pub use impute::{default_impute_k, knn_impute, ImputeReport};
pub use omics::{check_sample_alignment, OmicsKind, OmicsMatrix};
pub use power::{
    apply_power_transform, box_cox, fit_lambda, fit_power_transform, profile_log_likelihood,
    yeo_johnson, PowerMethod, PowerTransformParams, LAMBDA_RANGE,
};
pub use select::{select_features_bgmm, FeatureSelection, DEFAULT_CUMULATIVE_TARGET};
pub use standardize::zscore_standardize;

use crate::error::Result;

/// Steps applied by [`preprocess_omics`], in order.
pub const PIPELINE_ORDER: [&str; 5] = [
    "filter_sparse_features",
    "knn_impute",
    "zscore_standardize",
    "power_transform",
    "select_features_bgmm",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessConfig {
    pub zero_fraction_threshold: f64,
    /// `None` uses `round(√n)`.
    pub impute_k: Option<usize>,
    pub method: PowerMethod,
    pub cumulative_target: f64,
    pub gmm: BgmmConfig,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            zero_fraction_threshold: DEFAULT_ZERO_FRACTION,
            impute_k: None,
            method: PowerMethod::YeoJohnson,
            cumulative_target: DEFAULT_CUMULATIVE_TARGET,
            gmm: BgmmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessReport {
    pub kind: OmicsKind,
    pub order: Vec<&'static str>,
    pub input_features: usize,
    pub filter: FilterReport,
    pub impute: ImputeReport,
    pub constant_dropped: Vec<String>,
    pub transform: PowerTransformParams,
    pub selection: FeatureSelection,
    pub output_features: usize,
}

#[derive(Debug, Clone)]
pub struct PreprocessOutput {
    /// Filtered matrix, before imputation.
    pub filtered: OmicsMatrix,
    /// Imputed and Z-scored matrix.
    pub standardized: OmicsMatrix,
    /// Power-transformed matrix, before selection.
    pub transformed: OmicsMatrix,
    /// Final matrix after feature selection.
    pub selected: OmicsMatrix,
    pub report: PreprocessReport,
}

pub fn preprocess_omics(x: &OmicsMatrix, cfg: &PreprocessConfig) -> Result<PreprocessOutput> {
    let stage = |name: &str| format!("preprocess[{}]: {name}", x.kind());
    let (filtered, filter) = filter_sparse_features(x, cfg.zero_fraction_threshold)
        .map_err(|e| e.in_stage(stage("filter")))?;
    let (imputed, impute) =
        knn_impute(&filtered, cfg.impute_k).map_err(|e| e.in_stage(stage("impute")))?;
    let (standardized, constant_dropped) =
        zscore_standardize(&imputed).map_err(|e| e.in_stage(stage("zscore")))?;
    let transform = fit_power_transform(&standardized, cfg.method)
        .map_err(|e| e.in_stage(stage("power transform")))?;
    let transformed = apply_power_transform(&standardized, &transform)
        .map_err(|e| e.in_stage(stage("power transform")))?;
    let (selected, selection) = select_features_bgmm(&transformed, cfg.cumulative_target, &cfg.gmm)
        .map_err(|e| e.in_stage(stage("feature selection")))?;
    let report = PreprocessReport {
        kind: x.kind(),
        order: PIPELINE_ORDER.to_vec(),
        input_features: x.n_features(),
        filter,
        impute,
        constant_dropped,
        transform,
        selection,
        output_features: selected.n_features(),
    };
    Ok(PreprocessOutput {
        filtered,
        standardized,
        transformed,
        selected,
        report,
    })
}
