//! Pipeline settings: built-in defaults, overlaid by a flat `key = value`
//! file, overlaid by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use omicsfuse::clustering::{ClusterInput, ClusterOptions, DEFAULT_RESTARTS};
use omicsfuse::fusion::{STAGE1_K2_RANGE, STAGE3_K2_RANGE};
use omicsfuse::pipeline::{PipelineConfig, DEFAULT_CLUSTER_COUNTS, DEFAULT_EVAL_CLUSTERS};
use omicsfuse::preprocess::{PowerMethod, PreprocessConfig, DEFAULT_CUMULATIVE_TARGET, DEFAULT_ZERO_FRACTION};

use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Every recognised key with its default; `auto` and empty mean "derive or
/// omit".
pub fn default_settings() -> BTreeMap<&'static str, String> {
    let range = |(a, b): (usize, usize)| format!("{a}:{b}");
    let counts = DEFAULT_CLUSTER_COUNTS.map(|k| k.to_string()).join(",");
    BTreeMap::from([
        ("gene_expression", String::new()),
        ("mirna", String::new()),
        ("methylation", String::new()),
        ("survival", String::new()),
        ("truth", String::new()),
        ("out", String::new()),
        ("zero_fraction_threshold", DEFAULT_ZERO_FRACTION.to_string()),
        ("impute_k", "auto".to_string()),
        ("transform", "yeo_johnson".to_string()),
        ("cumulative_target", DEFAULT_CUMULATIVE_TARGET.to_string()),
        ("k1", "auto".to_string()),
        ("stage1_k2_range", range(STAGE1_K2_RANGE)),
        ("stage2_k2_range", "auto".to_string()),
        ("stage3_k2_range", range(STAGE3_K2_RANGE)),
        ("cluster_counts", counts),
        ("eval_clusters", DEFAULT_EVAL_CLUSTERS.to_string()),
        ("cluster_input", "fused_rows".to_string()),
        ("restarts", DEFAULT_RESTARTS.to_string()),
        ("seed", "0".to_string()),
    ])
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let known = default_settings();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("{}:{}: expected `key = value`", origin.display(), i + 1))
        })?;
        let key = key.trim().replace('-', "_");
        if !known.contains_key(key.as_str()) {
            return Err(CliError::Usage(format!(
                "{}:{}: unknown key `{key}`",
                origin.display(),
                i + 1
            )));
        }
        out.push((key, value.trim().to_string()));
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_text(&text, path)
}

/// Fully resolved pipeline invocation.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub inputs: [PathBuf; 3],
    pub survival: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub out: PathBuf,
    pub pipeline: PipelineConfig,
    /// Key/value view echoed into the output directory.
    pub settings: BTreeMap<&'static str, String>,
}

impl ResolvedConfig {
    /// Merges overrides in order onto the defaults and validates the result.
    pub fn resolve(overrides: &[(String, String)], env_out: Option<String>) -> Result<Self> {
        let mut settings = default_settings();
        if let Some(out) = env_out.filter(|s| !s.is_empty()) {
            settings.insert("out", out);
        }
        for (key, value) in overrides {
            let slot = settings
                .get_mut(key.as_str())
                .ok_or_else(|| CliError::Usage(format!("unknown setting `{key}`")))?;
            *slot = value.clone();
        }
        if settings["out"].is_empty() {
            settings.insert("out", crate::DEFAULT_OUT_DIR.to_string());
        }

        let path = |key: &str| -> Result<PathBuf> {
            let v = &settings[key];
            if v.is_empty() {
                Err(CliError::Usage(format!("missing required setting `{key}`")))
            } else {
                Ok(PathBuf::from(v))
            }
        };
        let optional_path = |key: &str| Some(&settings[key]).filter(|v| !v.is_empty()).map(PathBuf::from);
        let inputs = [path("gene_expression")?, path("mirna")?, path("methylation")?];

        let get = |key: &str| -> Result<&str> { Ok(settings[key].as_str()) };
        let seed: u64 = parse_value("seed", get("seed")?)?;
        let preprocess = PreprocessConfig {
            zero_fraction_threshold: parse_value("zero_fraction_threshold", get("zero_fraction_threshold")?)?,
            impute_k: parse_auto("impute_k", get("impute_k")?)?,
            method: parse_value::<PowerMethod>("transform", get("transform")?)?,
            cumulative_target: parse_value("cumulative_target", get("cumulative_target")?)?,
            ..PreprocessConfig::default()
        };
        if !(0.0..=1.0).contains(&preprocess.zero_fraction_threshold) {
            return Err(CliError::Usage("zero_fraction_threshold must lie in [0, 1]".into()));
        }
        if !(preprocess.cumulative_target > 0.0 && preprocess.cumulative_target <= 1.0) {
            return Err(CliError::Usage("cumulative_target must lie in (0, 1]".into()));
        }
        let pipeline = PipelineConfig {
            preprocess,
            k1: parse_auto("k1", get("k1")?)?,
            stage1_k2_range: parse_range("stage1_k2_range", get("stage1_k2_range")?)?,
            stage2_k2_range: if get("stage2_k2_range")? == "auto" {
                None
            } else {
                Some(parse_range("stage2_k2_range", get("stage2_k2_range")?)?)
            },
            stage3_k2_range: parse_range("stage3_k2_range", get("stage3_k2_range")?)?,
            cluster_counts: parse_counts("cluster_counts", get("cluster_counts")?)?,
            eval_clusters: parse_value("eval_clusters", get("eval_clusters")?)?,
            cluster: ClusterOptions {
                input: parse_value::<ClusterInput>("cluster_input", get("cluster_input")?)?,
                seed,
                restarts: parse_value("restarts", get("restarts")?)?,
            },
            seed,
        };
        if pipeline.cluster.restarts == 0 {
            return Err(CliError::Usage("restarts must be at least 1".into()));
        }
        Ok(Self {
            inputs,
            survival: optional_path("survival"),
            truth: optional_path("truth"),
            out: PathBuf::from(&settings["out"]),
            pipeline,
            settings,
        })
    }

    pub fn to_text(&self) -> String {
        self.settings.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Usage(format!("invalid value `{value}` for `{key}`: {e}")))
}

fn parse_auto(key: &str, value: &str) -> Result<Option<usize>> {
    match value.trim() {
        "auto" | "" => Ok(None),
        v => {
            let k: usize = parse_value(key, v)?;
            if k == 0 {
                return Err(CliError::Usage(format!("`{key}` must be positive")));
            }
            Ok(Some(k))
        }
    }
}

/// `lo:hi` with `lo ≤ hi`.
pub fn parse_range(key: &str, value: &str) -> Result<(usize, usize)> {
    let (a, b) = value
        .split_once(':')
        .ok_or_else(|| CliError::Usage(format!("`{key}` expects `lo:hi`, got `{value}`")))?;
    let (lo, hi): (usize, usize) = (parse_value(key, a)?, parse_value(key, b)?);
    if lo == 0 || lo > hi {
        return Err(CliError::Usage(format!("`{key}` range `{value}` is empty or starts at 0")));
    }
    Ok((lo, hi))
}

/// Comma-separated cluster counts, each at least 2.
pub fn parse_counts(key: &str, value: &str) -> Result<Vec<usize>> {
    let counts = value
        .split(',')
        .map(|s| parse_value::<usize>(key, s))
        .collect::<Result<Vec<_>>>()?;
    if counts.iter().any(|&k| k < 2) {
        return Err(CliError::Usage(format!("`{key}` entries must be at least 2")));
    }
    Ok(counts)
}
