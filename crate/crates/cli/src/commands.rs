//! Subcommands: `pipeline`, `synth`, `survival` and `metrics`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use omicsfuse::clustering::{ari, nmi, sweep_k2_metrics, Partition};
use omicsfuse::fusion::StageRecord;
use omicsfuse::pipeline::{run_pipeline, PipelineResult};
use omicsfuse::preprocess::{OmicsKind, OmicsMatrix};
use omicsfuse::survival::{logrank_test, SurvivalRecord, SurvivalReport, SIGNIFICANCE_THRESHOLD};
use omicsfuse::synthgen::{generate, SynthSpec};
use serde::Serialize;

use crate::config::{read_config_file, ResolvedConfig};
use crate::error::CliError;
use crate::io::{self, fmt_num};

type Result<T> = std::result::Result<T, CliError>;

pub const KINDS: [OmicsKind; 3] = [OmicsKind::GeneExpression, OmicsKind::Mirna, OmicsKind::Methylation];
pub const HISTOGRAM_BINS: usize = 30;

#[derive(Debug, Parser)]
#[command(name = "omicsfuse", version, about = "Multi-omics affinity fusion and clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Preprocess, fuse and cluster three omics matrices.
    Pipeline(Box<PipelineArgs>),
    /// Write a synthetic dataset with planted clusters.
    Synth(SynthArgs),
    /// Log-rank test of every labeling in a labels file.
    Survival(SurvivalArgs),
    /// ARI and NMI of every labeling against a truth labeling.
    Metrics(MetricsArgs),
}

/// Every flag overrides the key of the same name (dashes become underscores)
/// from `--config`.
#[derive(Debug, Default, Args)]
pub struct PipelineArgs {
    /// Flat `key = value` settings file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gene_expression: Option<String>,
    #[arg(long)]
    pub mirna: Option<String>,
    #[arg(long)]
    pub methylation: Option<String>,
    /// `sample_id,time,event` file; enables survival reports.
    #[arg(long)]
    pub survival: Option<String>,
    /// Labels file whose first column holds the true clusters; enables metrics.
    #[arg(long)]
    pub truth: Option<String>,
    /// Output directory [env: OMICSFUSE_OUT, default: omicsfuse_out].
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub zero_fraction_threshold: Option<String>,
    /// Neighbours for imputation, or `auto`.
    #[arg(long)]
    pub impute_k: Option<String>,
    /// `yeo_johnson` or `box_cox`.
    #[arg(long)]
    pub transform: Option<String>,
    #[arg(long)]
    pub cumulative_target: Option<String>,
    /// Local-scale neighbourhood, or `auto`.
    #[arg(long)]
    pub k1: Option<String>,
    /// `lo:hi`.
    #[arg(long)]
    pub stage1_k2_range: Option<String>,
    /// `lo:hi`, or `auto` for `2:n+2`.
    #[arg(long)]
    pub stage2_k2_range: Option<String>,
    /// `lo:hi`.
    #[arg(long)]
    pub stage3_k2_range: Option<String>,
    /// Comma-separated cluster counts to label.
    #[arg(long)]
    pub cluster_counts: Option<String>,
    /// Cluster count the fusion is tuned for and metrics use.
    #[arg(long)]
    pub eval_clusters: Option<String>,
    /// `fused_rows` or `spectral_factor`.
    #[arg(long)]
    pub cluster_input: Option<String>,
    #[arg(long)]
    pub restarts: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
}

impl PipelineArgs {
    fn overrides(&self) -> Vec<(String, String)> {
        let flags = [
            ("gene_expression", &self.gene_expression),
            ("mirna", &self.mirna),
            ("methylation", &self.methylation),
            ("survival", &self.survival),
            ("truth", &self.truth),
            ("out", &self.out),
            ("zero_fraction_threshold", &self.zero_fraction_threshold),
            ("impute_k", &self.impute_k),
            ("transform", &self.transform),
            ("cumulative_target", &self.cumulative_target),
            ("k1", &self.k1),
            ("stage1_k2_range", &self.stage1_k2_range),
            ("stage2_k2_range", &self.stage2_k2_range),
            ("stage3_k2_range", &self.stage3_k2_range),
            ("cluster_counts", &self.cluster_counts),
            ("eval_clusters", &self.eval_clusters),
            ("cluster_input", &self.cluster_input),
            ("restarts", &self.restarts),
            ("seed", &self.seed),
        ];
        flags
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 150)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 120)]
    pub ge_features: usize,
    #[arg(long, default_value_t = 60)]
    pub mirna_features: usize,
    #[arg(long, default_value_t = 90)]
    pub methylation_features: usize,
    #[arg(long, default_value_t = 8.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0.5)]
    pub noise_features_fraction: f64,
    #[arg(long, default_value_t = 0.05)]
    pub missing_rate: f64,
    #[arg(long, default_value_t = 0.10)]
    pub high_missing_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub high_missing_rate: f64,
    #[arg(long, default_value_t = 3.0)]
    pub hazard_ratio: f64,
    #[arg(long, default_value_t = 0.2)]
    pub censoring_rate: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory [env: OMICSFUSE_OUT, default: omicsfuse_out].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SynthArgs {
    pub fn spec(&self) -> SynthSpec {
        SynthSpec {
            n: self.n,
            k: self.k,
            dims: [self.ge_features, self.mirna_features, self.methylation_features],
            separation: self.separation,
            noise_features_fraction: self.noise_features_fraction,
            missing_rate: self.missing_rate,
            high_missing_fraction: self.high_missing_fraction,
            high_missing_rate: self.high_missing_rate,
            hazard_ratio: self.hazard_ratio,
            censoring_rate: self.censoring_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SurvivalArgs {
    /// Labels file: `sample_id` then one column per labeling.
    #[arg(long)]
    pub labels: PathBuf,
    /// `sample_id,time,event` file.
    #[arg(long)]
    pub survival: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Labels file: `sample_id` then one column per labeling.
    #[arg(long)]
    pub labels: PathBuf,
    /// Labels file whose first column holds the true clusters.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    let env_out = std::env::var(crate::OUT_DIR_ENV).ok();
    match cli.command {
        Command::Pipeline(args) => cmd_pipeline(&args, env_out),
        Command::Synth(args) => cmd_synth(&args, env_out),
        Command::Survival(args) => cmd_survival(&args, env_out),
        Command::Metrics(args) => cmd_metrics(&args, env_out),
    }
}

fn out_dir(flag: Option<&PathBuf>, env_out: Option<String>) -> PathBuf {
    flag.cloned()
        .or_else(|| env_out.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(crate::DEFAULT_OUT_DIR))
}

/// Positions in `ids` of each `reference` id. Missing and unexpected ids are
/// reported together.
pub fn align_to(reference: &[String], ids: &[String], what: &str) -> Result<Vec<usize>> {
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let known: HashSet<&str> = reference.iter().map(String::as_str).collect();
    let mut bad: Vec<String> = reference
        .iter()
        .filter(|id| !index.contains_key(id.as_str()))
        .map(|id| format!("{id} (missing from {what})"))
        .collect();
    bad.extend(
        ids.iter()
            .filter(|id| !known.contains(id.as_str()))
            .map(|id| format!("{id} (only in {what})")),
    );
    if !bad.is_empty() {
        return Err(CliError::Alignment(bad));
    }
    Ok(reference.iter().map(|id| index[id.as_str()]).collect())
}

fn partition_of(labels: &[String]) -> Partition {
    Partition::from_labels(&labels.iter().map(String::as_str).collect::<Vec<_>>())
}

fn reorder<T: Clone>(items: &[T], order: &[usize]) -> Vec<T> {
    order.iter().map(|&i| items[i].clone()).collect()
}

fn truth_partition(path: &Path, reference: &[String]) -> Result<Partition> {
    let labels = io::read_labels_csv(path)?;
    let order = align_to(reference, &labels.sample_ids, &path.display().to_string())?;
    Ok(partition_of(&reorder(&labels.columns[0].1, &order)))
}

#[derive(Debug, Serialize)]
struct HistogramBin {
    lo: f64,
    hi: f64,
    count: usize,
}

fn histogram(m: &OmicsMatrix, bins: usize) -> Vec<HistogramBin> {
    let values: Vec<f64> = m.values().as_slice().iter().copied().filter(|x| x.is_finite()).collect();
    let Some(lo) = values.iter().copied().reduce(f64::min) else {
        return Vec::new();
    };
    let hi = values.iter().copied().fold(lo, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for x in values {
        let b = (((x - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            lo: lo + b as f64 * width,
            hi: lo + (b + 1) as f64 * width,
            count,
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct CandidateSummary {
    k2: usize,
    gamma: f64,
    iterations: Option<usize>,
    converged: Option<bool>,
    eigengap: Option<f64>,
    alpha: Vec<f64>,
    final_objective: Option<f64>,
    error: Option<String>,
}

#[derive(Debug, Serialize)]
struct FusionReport<'a> {
    k1: usize,
    eval_clusters: usize,
    stage1: &'a StageRecord,
    stage2: &'a StageRecord,
    stage3_k2_range: (usize, usize),
    chosen_k2: usize,
    candidates: Vec<CandidateSummary>,
}

#[derive(Debug, Serialize)]
struct LabeledSurvival<'a> {
    labeling: &'a str,
    report: SurvivalReport,
}

#[derive(Debug, Serialize)]
struct MetricRow {
    labeling: String,
    clusters: usize,
    ari: f64,
    nmi: f64,
}

#[derive(Debug, Serialize)]
struct SampleCounts {
    kind: OmicsKind,
    input_features: usize,
    selected_features: usize,
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    samples: usize,
    omics: Vec<SampleCounts>,
    k1: usize,
    chosen_k2: usize,
    eval_clusters: usize,
    cluster_counts: &'a [usize],
    metrics: Option<&'a [MetricRow]>,
    survival: Option<&'a [LabeledSurvival<'a>]>,
}

fn survival_rows(reports: &[LabeledSurvival]) -> Vec<Vec<String>> {
    reports
        .iter()
        .map(|s| {
            let r = &s.report;
            vec![
                s.labeling.to_string(),
                r.groups.to_string(),
                fmt_num(r.chi2),
                r.df.to_string(),
                fmt_num(r.p),
                fmt_num(r.neg_log10_p),
                r.significant.to_string(),
                fmt_num(r.threshold),
            ]
        })
        .collect()
}

const SURVIVAL_HEADER: [&str; 8] = [
    "labeling",
    "groups",
    "chi2",
    "df",
    "p",
    "neg_log10_p",
    "significant",
    "threshold",
];

fn metric_rows(rows: &[MetricRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|m| vec![m.labeling.clone(), m.clusters.to_string(), fmt_num(m.ari), fmt_num(m.nmi)])
        .collect()
}

pub fn cmd_pipeline(args: &PipelineArgs, env_out: Option<String>) -> Result<()> {
    let mut overrides = match &args.config {
        Some(path) => read_config_file(path)?,
        None => Vec::new(),
    };
    overrides.extend(args.overrides());
    let cfg = ResolvedConfig::resolve(&overrides, env_out)?;

    let mut omics = Vec::with_capacity(3);
    for (path, kind) in cfg.inputs.iter().zip(KINDS) {
        omics.push(io::read_omics_csv(path, kind)?);
    }
    let reference = omics[0].sample_ids().to_vec();
    for (i, path) in cfg.inputs.iter().enumerate().skip(1) {
        let order = align_to(&reference, omics[i].sample_ids(), &path.display().to_string())?;
        omics[i] = omics[i].select_samples(&order);
    }
    let survival = match &cfg.survival {
        Some(path) => {
            let (ids, records) = io::read_survival_csv(path)?;
            let order = align_to(&reference, &ids, &path.display().to_string())?;
            Some(reorder(&records, &order))
        }
        None => None,
    };
    let truth = match &cfg.truth {
        Some(path) => Some(truth_partition(path, &reference)?),
        None => None,
    };

    let result = run_pipeline([&omics[0], &omics[1], &omics[2]], &cfg.pipeline)?;
    write_pipeline_outputs(&cfg, &omics, &result, survival.as_deref(), truth.as_ref())?;
    println!(
        "{} samples, chosen k2 = {}, artifacts in {}",
        result.sample_ids.len(),
        result.fusion.chosen_candidate().k2,
        cfg.out.display()
    );
    Ok(())
}

fn labeling_columns(cfg: &ResolvedConfig, result: &PipelineResult) -> Vec<(String, Partition)> {
    let mut cols: Vec<(String, Partition)> =
        result.labels.iter().map(|(k, p)| (format!("k3_{k}"), p.clone())).collect();
    if !cfg.pipeline.cluster_counts.contains(&cfg.pipeline.eval_clusters) {
        cols.push((format!("eval_{}", cfg.pipeline.eval_clusters), result.eval_labels.clone()));
    }
    cols
}

fn write_pipeline_outputs(
    cfg: &ResolvedConfig,
    raw: &[OmicsMatrix],
    result: &PipelineResult,
    survival: Option<&[SurvivalRecord]>,
    truth: Option<&Partition>,
) -> Result<()> {
    let out = &cfg.out;
    let ids = &result.sample_ids;
    io::write_text(&out.join("config.resolved.txt"), &cfg.to_text())?;

    let reports: Vec<_> = result.preprocessed.iter().map(|p| &p.report).collect();
    io::write_json(&out.join("preprocess_report.json"), &reports)?;
    for ((kind, p), input) in KINDS.iter().zip(&result.preprocessed).zip(raw) {
        let stages = [
            ("raw", input),
            ("standardized", &p.standardized),
            ("transformed", &p.transformed),
            ("selected", &p.selected),
        ];
        for (stage, m) in stages {
            let rows: Vec<Vec<String>> = histogram(m, HISTOGRAM_BINS)
                .iter()
                .map(|b| vec![fmt_num(b.lo), fmt_num(b.hi), b.count.to_string()])
                .collect();
            let path = out.join("histograms").join(format!("{kind}_{stage}.csv"));
            io::write_rows(&path, &["bin_lo", "bin_hi", "count"], &rows)?;
        }
    }

    let affinity_dir = out.join("affinity");
    for (kind, a) in KINDS.iter().zip(&result.intra) {
        io::write_sample_matrix_csv(&affinity_dir.join(format!("intra_{kind}.csv")), ids, a.as_matrix())?;
    }
    for (pair, a) in &result.inter {
        let path = affinity_dir.join(format!("inter_{}.csv", pair.label()));
        io::write_sample_matrix_csv(&path, ids, a.as_matrix())?;
    }

    let fusion = &result.fusion;
    let fused_dir = out.join("fused");
    let mut summaries = Vec::with_capacity(fusion.candidates.len());
    for cand in &fusion.candidates {
        let summary = match &cand.outcome {
            Ok(state) => {
                io::write_sample_matrix_csv(&fused_dir.join(format!("s_k2_{}.csv", cand.k2)), ids, &state.s)?;
                CandidateSummary {
                    k2: cand.k2,
                    gamma: cand.gamma,
                    iterations: Some(state.iterations),
                    converged: Some(state.converged),
                    eigengap: cand.eigengap,
                    alpha: state.alpha.clone(),
                    final_objective: state.objective_trace.last().copied(),
                    error: None,
                }
            }
            Err(e) => CandidateSummary {
                k2: cand.k2,
                gamma: cand.gamma,
                iterations: None,
                converged: None,
                eigengap: None,
                alpha: Vec::new(),
                final_objective: None,
                error: Some(e.to_string()),
            },
        };
        summaries.push(summary);
    }
    let opt = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .enumerate()
        .map(|(i, c)| {
            vec![
                c.k2.to_string(),
                fmt_num(c.gamma),
                c.iterations.map(|v| v.to_string()).unwrap_or_default(),
                c.converged.map(|v| v.to_string()).unwrap_or_default(),
                opt(c.eigengap),
                opt(c.alpha.first().copied()),
                opt(c.alpha.get(1).copied()),
                opt(c.final_objective),
                (i == fusion.chosen).to_string(),
                c.error.clone().unwrap_or_default(),
            ]
        })
        .collect();
    io::write_rows(
        &fused_dir.join("candidates.csv"),
        &[
            "k2",
            "gamma",
            "iterations",
            "converged",
            "eigengap",
            "alpha_stage1",
            "alpha_stage2",
            "objective",
            "chosen",
            "error",
        ],
        &rows,
    )?;
    io::write_json(
        &out.join("fusion_report.json"),
        &FusionReport {
            k1: result.k1,
            eval_clusters: cfg.pipeline.eval_clusters,
            stage1: &fusion.stage1,
            stage2: &fusion.stage2,
            stage3_k2_range: cfg.pipeline.stage3_k2_range,
            chosen_k2: fusion.chosen_candidate().k2,
            candidates: summaries,
        },
    )?;

    let columns = labeling_columns(cfg, result);
    let label_cols: Vec<(String, Vec<usize>)> =
        columns.iter().map(|(n, p)| (n.clone(), p.labels().to_vec())).collect();
    io::write_labels_csv(&out.join("labels.csv"), ids, &label_cols)?;

    let metrics = match truth {
        Some(truth) => {
            let sweep = sweep_k2_metrics(&fusion.candidates, truth, cfg.pipeline.eval_clusters, &cfg.pipeline.cluster);
            let rows: Vec<Vec<String>> = sweep
                .iter()
                .map(|r| {
                    vec![
                        r.k2.to_string(),
                        opt(r.ari),
                        opt(r.nmi),
                        r.error.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            io::write_rows(&out.join("metrics").join("sweep.csv"), &["k2", "ari", "nmi", "error"], &rows)?;
            let final_rows: Vec<MetricRow> = columns
                .iter()
                .map(|(name, p)| metric_row(name, p, truth))
                .collect::<Result<_>>()?;
            io::write_rows(
                &out.join("metrics").join("final.csv"),
                &["labeling", "clusters", "ari", "nmi"],
                &metric_rows(&final_rows),
            )?;
            io::write_json(&out.join("metrics").join("final.json"), &final_rows)?;
            Some(final_rows)
        }
        None => None,
    };

    let survival_reports = match survival {
        Some(records) => {
            let reports = columns
                .iter()
                .map(|(name, p)| {
                    Ok(LabeledSurvival {
                        labeling: name,
                        report: logrank_test(p, records).map_err(|e| e.in_stage(format!("survival {name}")))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            io::write_json(&out.join("survival").join("report.json"), &reports)?;
            io::write_rows(&out.join("survival").join("report.csv"), &SURVIVAL_HEADER, &survival_rows(&reports))?;
            Some(reports)
        }
        None => None,
    };

    let report = RunReport {
        samples: ids.len(),
        omics: KINDS
            .iter()
            .zip(&result.preprocessed)
            .map(|(&kind, p)| SampleCounts {
                kind,
                input_features: p.report.input_features,
                selected_features: p.report.output_features,
            })
            .collect(),
        k1: result.k1,
        chosen_k2: fusion.chosen_candidate().k2,
        eval_clusters: cfg.pipeline.eval_clusters,
        cluster_counts: &cfg.pipeline.cluster_counts,
        metrics: metrics.as_deref(),
        survival: survival_reports.as_deref(),
    };
    io::write_json(&out.join("report.json"), &report)
}

fn metric_row(name: &str, labels: &Partition, truth: &Partition) -> Result<MetricRow> {
    Ok(MetricRow {
        labeling: name.to_string(),
        clusters: labels.k(),
        ari: ari(labels, truth)?,
        nmi: nmi(labels, truth)?,
    })
}

pub fn cmd_synth(args: &SynthArgs, env_out: Option<String>) -> Result<()> {
    let spec = args.spec();
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data = generate(&spec)?;
    let out = out_dir(args.out.as_ref(), env_out);
    for (kind, m) in KINDS.iter().zip(&data.omics) {
        io::write_omics_csv(&out.join(format!("{kind}.csv")), m)?;
    }
    io::write_survival_csv(&out.join("survival.csv"), &data.sample_ids, &data.records)?;
    io::write_labels_csv(
        &out.join("truth_labels.csv"),
        &data.sample_ids,
        &[("truth".to_string(), data.clusters.clone())],
    )?;
    io::write_json(&out.join("synth_spec.json"), &spec)?;
    println!("{} samples, {} clusters written to {}", spec.n, spec.k, out.display());
    Ok(())
}

/// Labelings and survival records aligned to the labels file's sample order.
type NamedPartitions = Vec<(String, Partition)>;

fn aligned_labelings(labels: &Path, survival: &Path) -> Result<(NamedPartitions, Vec<SurvivalRecord>)> {
    let labelings = io::read_labels_csv(labels)?;
    let (ids, records) = io::read_survival_csv(survival)?;
    let order = align_to(&labelings.sample_ids, &ids, &survival.display().to_string())?;
    let records = reorder(&records, &order);
    let cols = labelings
        .columns
        .iter()
        .map(|(name, v)| (name.clone(), partition_of(v)))
        .collect();
    Ok((cols, records))
}

pub fn cmd_survival(args: &SurvivalArgs, env_out: Option<String>) -> Result<()> {
    let (cols, records) = aligned_labelings(&args.labels, &args.survival)?;
    let reports = cols
        .iter()
        .map(|(name, p)| {
            Ok(LabeledSurvival {
                labeling: name,
                report: logrank_test(p, &records).map_err(|e| e.in_stage(format!("survival {name}")))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let out = out_dir(args.out.as_ref(), env_out);
    io::write_json(&out.join("survival_report.json"), &reports)?;
    io::write_rows(&out.join("survival_report.csv"), &SURVIVAL_HEADER, &survival_rows(&reports))?;
    for s in &reports {
        println!(
            "{}: -log10 p = {} ({} at {})",
            s.labeling,
            fmt_num(s.report.neg_log10_p),
            if s.report.significant { "significant" } else { "not significant" },
            fmt_num(SIGNIFICANCE_THRESHOLD)
        );
    }
    Ok(())
}

pub fn cmd_metrics(args: &MetricsArgs, env_out: Option<String>) -> Result<()> {
    let labelings = io::read_labels_csv(&args.labels)?;
    let truth = truth_partition(&args.truth, &labelings.sample_ids)?;
    let rows = labelings
        .columns
        .iter()
        .map(|(name, v)| metric_row(name, &partition_of(v), &truth))
        .collect::<Result<Vec<_>>>()?;
    let out = out_dir(args.out.as_ref(), env_out);
    io::write_rows(&out.join("metrics.csv"), &["labeling", "clusters", "ari", "nmi"], &metric_rows(&rows))?;
    io::write_json(&out.join("metrics.json"), &rows)?;
    let summary: BTreeMap<&str, String> = rows.iter().map(|r| (r.labeling.as_str(), fmt_num(r.ari))).collect();
    for (name, a) in summary {
        println!("{name}: ARI = {a}");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn alignment_reorders() {
        let order = align_to(&ids(&["a", "b", "c"]), &ids(&["c", "a", "b"]), "x").unwrap();
        assert_eq!(order, vec![1, 2, 0]);
    }

    #[test]
    fn alignment_reports_both_sides() {
        let err = align_to(&ids(&["a", "b", "c"]), &ids(&["a", "b", "d"]), "x").unwrap_err();
        match err {
            CliError::Alignment(bad) => {
                assert_eq!(bad, vec!["c (missing from x)".to_string(), "d (only in x)".to_string()])
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn histogram_counts_observed_cells() {
        use omicsfuse::numkernel::RealMatrix;
        let v = RealMatrix::from_rows(&[[0.0, 1.0], [f64::NAN, 0.5]]).unwrap();
        let m = OmicsMatrix::new(v, ids(&["s1", "s2"]), ids(&["f1", "f2"]), OmicsKind::Other).unwrap();
        let h = histogram(&m, 4);
        assert_eq!(h.iter().map(|b| b.count).collect::<Vec<_>>(), vec![1, 0, 1, 1]);
        assert_eq!(h[0].lo, 0.0);
        assert_eq!(h[3].hi, 1.0);
    }
}
