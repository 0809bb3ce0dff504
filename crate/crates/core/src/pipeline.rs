//! End-to-end run: preprocessing, intra- and inter-dataset affinities,
//! three-stage fusion and k-means++ labels.

use rayon::prelude::*;

use crate::affinity::{affinity_from_distance, default_k1, euclidean_distance_matrix, AffinityMatrix};
use crate::cca::{all_directed_pair_distances, DirectedPair};
use crate::clustering::{cluster_fused, ClusterOptions, Partition};
use crate::error::{OmicsError, Result};
use crate::fusion::{three_stage_fuse, ThreeStageConfig, ThreeStageOutput, STAGE1_K2_RANGE, STAGE3_K2_RANGE};
use crate::preprocess::{check_sample_alignment, preprocess_omics, OmicsMatrix, PreprocessConfig, PreprocessOutput};

pub const DEFAULT_CLUSTER_COUNTS: [usize; 3] = [3, 4, 5];
pub const DEFAULT_EVAL_CLUSTERS: usize = 2;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    /// Local-scale neighbourhood; `None` uses `round(√n)`.
    pub k1: Option<usize>,
    pub stage1_k2_range: (usize, usize),
    /// `None` uses `[2, n + 2]`.
    pub stage2_k2_range: Option<(usize, usize)>,
    pub stage3_k2_range: (usize, usize),
    /// Cluster counts for which labels are produced.
    pub cluster_counts: Vec<usize>,
    /// Cluster count the fusion is tuned for and the metrics use.
    pub eval_clusters: usize,
    pub cluster: ClusterOptions,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            k1: None,
            stage1_k2_range: STAGE1_K2_RANGE,
            stage2_k2_range: None,
            stage3_k2_range: STAGE3_K2_RANGE,
            cluster_counts: DEFAULT_CLUSTER_COUNTS.to_vec(),
            eval_clusters: DEFAULT_EVAL_CLUSTERS,
            cluster: ClusterOptions::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub sample_ids: Vec<String>,
    pub preprocessed: [PreprocessOutput; 3],
    pub k1: usize,
    /// Gene expression, miRNA, methylation.
    pub intra: [AffinityMatrix; 3],
    pub inter: [(DirectedPair, AffinityMatrix); 6],
    pub fusion: ThreeStageOutput,
    /// Labels of the selected fused network for each requested cluster count.
    pub labels: Vec<(usize, Partition)>,
    /// Labels at the evaluation cluster count.
    pub eval_labels: Partition,
}

/// Runs the whole pipeline on `[gene expression, miRNA, methylation]`.
///
/// Intra-dataset affinities are built from the imputed, standardized
/// matrices; CCA runs on the power-transformed, feature-selected matrices.
pub fn run_pipeline(omics: [&OmicsMatrix; 3], cfg: &PipelineConfig) -> Result<PipelineResult> {
    let sample_ids = omics[0].sample_ids().to_vec();
    for m in &omics[1..] {
        check_sample_alignment(&sample_ids, m.sample_ids())?;
    }
    let n = sample_ids.len();
    if let Some(&bad) = cfg.cluster_counts.iter().chain([&cfg.eval_clusters]).find(|&&k| k < 2 || k > n) {
        return Err(OmicsError::Argument(format!(
            "cluster count {bad} must lie in [2, {n}]"
        )));
    }
    let mut pcfg = cfg.preprocess.clone();
    pcfg.gmm.seed = cfg.seed;

    let pre: Vec<PreprocessOutput> = omics
        .par_iter()
        .map(|m| preprocess_omics(m, &pcfg))
        .collect::<Result<_>>()?;
    let preprocessed: [PreprocessOutput; 3] = pre.try_into().expect("three outputs");

    let k1 = cfg.k1.unwrap_or_else(|| default_k1(n));
    let intra: Vec<AffinityMatrix> = preprocessed
        .iter()
        .map(|p| {
            let d = euclidean_distance_matrix(&p.standardized)?;
            affinity_from_distance(&d, k1)
        })
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("intra affinity"))?;
    let intra: [AffinityMatrix; 3] = intra.try_into().expect("three intra affinities");

    let distances = all_directed_pair_distances([
        &preprocessed[0].selected,
        &preprocessed[1].selected,
        &preprocessed[2].selected,
    ])?;
    let inter: Vec<(DirectedPair, AffinityMatrix)> = distances
        .iter()
        .map(|(pair, d)| Ok((*pair, affinity_from_distance(d, k1)?)))
        .collect::<Result<_>>()
        .map_err(|e| e.in_stage("inter affinity"))?;
    let inter: [(DirectedPair, AffinityMatrix); 6] = inter.try_into().expect("six pairs");

    let fusion_cfg = ThreeStageConfig {
        cluster_count: cfg.eval_clusters,
        stage1_k2_range: cfg.stage1_k2_range,
        stage2_k2_range: cfg.stage2_k2_range,
        stage3_k2_range: cfg.stage3_k2_range,
        k1: Some(k1),
        ..ThreeStageConfig::new(cfg.eval_clusters)
    };
    let inter_only: [AffinityMatrix; 6] = inter.clone().map(|(_, a)| a);
    let fusion = three_stage_fuse(&intra, &inter_only, &fusion_cfg)?;

    let final_state = fusion.final_state();
    let labels = cfg
        .cluster_counts
        .iter()
        .map(|&k| Ok((k, cluster_fused(final_state, k, &cfg.cluster)?)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("clustering"))?;
    let eval_labels = cluster_fused(final_state, cfg.eval_clusters, &cfg.cluster)
        .map_err(|e| e.in_stage("clustering"))?;

    Ok(PipelineResult {
        sample_ids,
        preprocessed,
        k1,
        intra,
        inter,
        fusion,
        labels,
        eval_labels,
    })
}
