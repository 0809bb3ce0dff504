use serde::Serialize;

use super::bgmm::{fit_bayesian_gmm, BgmmConfig};
use super::OmicsMatrix;
use crate::error::{OmicsError, Result};

/// Default share of total relevance the retained features must cover.
pub const DEFAULT_CUMULATIVE_TARGET: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSelection {
    /// Retained feature indices, ascending (original order).
    pub selected: Vec<usize>,
    /// Relevance of every input feature.
    pub scores: Vec<f64>,
    pub effective_components: usize,
    pub mixture_weights: Vec<f64>,
}

/// Ranks features by the between-component variance of a fitted diagonal
/// Bayesian GMM and keeps the smallest top-ranked set whose normalized
/// cumulative relevance reaches `cumulative_target`.
///
/// With a single effective component the mixture carries no between-group
/// signal and the score falls back to marginal variance. Ties are broken by
/// marginal variance, then by index.
pub fn select_features_bgmm(
    x: &OmicsMatrix,
    cumulative_target: f64,
    gmm: &BgmmConfig,
) -> Result<(OmicsMatrix, FeatureSelection)> {
    if !(cumulative_target > 0.0 && cumulative_target <= 1.0) {
        return Err(OmicsError::Argument(format!(
            "cumulative target must lie in (0, 1], got {cumulative_target}"
        )));
    }
    x.require_complete("feature selection")?;
    let p = x.n_features();
    let fit = fit_bayesian_gmm(x.values(), gmm)?;
    let model = &fit.model;

    let marginal = marginal_variances(x);
    let scores: Vec<f64> = if model.effective_components >= 2 {
        (0..p)
            .map(|f| {
                let centre: f64 = model
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * model.means[(k, f)])
                    .sum();
                model
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| w * (model.means[(k, f)] - centre).powi(2))
                    .sum()
            })
            .collect()
    } else {
        marginal.clone()
    };

    let mut ranked: Vec<usize> = (0..p).collect();
    ranked.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then(marginal[b].total_cmp(&marginal[a]))
            .then(a.cmp(&b))
    });
    let mut cumulative = Vec::with_capacity(p);
    let mut acc = 0.0;
    for &f in &ranked {
        acc += scores[f];
        cumulative.push(acc);
    }
    let total = acc;
    let keep = if total <= 0.0 {
        p
    } else {
        cumulative
            .iter()
            .position(|&c| c / total >= cumulative_target)
            .map_or(p, |i| i + 1)
    };
    let mut selected: Vec<usize> = ranked[..keep].to_vec();
    selected.sort_unstable();
    let out = x.select_features(&selected);
    Ok((
        out,
        FeatureSelection {
            selected,
            scores,
            effective_components: model.effective_components,
            mixture_weights: model.weights.clone(),
        },
    ))
}

fn marginal_variances(x: &OmicsMatrix) -> Vec<f64> {
    let n = x.n_samples() as f64;
    (0..x.n_features())
        .map(|f| {
            let col = x.values().col(f);
            let mean = col.iter().sum::<f64>() / n;
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::RealMatrix;
    use crate::preprocess::OmicsKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn planted(seed: u64) -> OmicsMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 120;
        let p = 10;
        let v = RealMatrix::from_fn(n, p, |i, f| {
            let z: f64 = StandardNormal.sample(&mut rng);
            // features 3 and 7 carry a two-blob split
            let shift = if (f == 3 || f == 7) && i >= n / 2 { 8.0 } else { 0.0 };
            z + shift
        });
        OmicsMatrix::new(
            v,
            (0..n).map(|i| format!("s{i}")).collect(),
            (0..p).map(|f| format!("f{f}")).collect(),
            OmicsKind::GeneExpression,
        )
        .unwrap()
    }

    #[test]
    fn full_target_keeps_everything() {
        let x = planted(1);
        let (out, sel) = select_features_bgmm(&x, 1.0, &BgmmConfig::default()).unwrap();
        assert_eq!(out.n_features(), 10);
        assert_eq!(sel.selected, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn informative_features_rank_first() {
        let x = planted(2);
        let (_, sel) = select_features_bgmm(&x, 0.95, &BgmmConfig::default()).unwrap();
        assert!(sel.effective_components >= 2);
        let mut order: Vec<usize> = (0..10).collect();
        order.sort_by(|&a, &b| sel.scores[b].total_cmp(&sel.scores[a]));
        let mut top: Vec<usize> = order[..2].to_vec();
        top.sort_unstable();
        assert_eq!(top, vec![3, 7]);
        assert!(sel.selected.contains(&3) && sel.selected.contains(&7));
        assert!(sel.scores.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn selection_is_an_ordered_subset() {
        let x = planted(3);
        let (out, sel) = select_features_bgmm(&x, 0.5, &BgmmConfig::default()).unwrap();
        assert!(sel.selected.windows(2).all(|w| w[0] < w[1]));
        for (j, &f) in sel.selected.iter().enumerate() {
            assert_eq!(out.feature_ids()[j], x.feature_ids()[f]);
        }
    }

    #[test]
    fn bad_target_rejected() {
        let x = planted(4);
        assert!(select_features_bgmm(&x, 0.0, &BgmmConfig::default()).is_err());
        assert!(select_features_bgmm(&x, 1.5, &BgmmConfig::default()).is_err());
    }
}
