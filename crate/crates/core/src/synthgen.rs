//! Deterministic synthetic multi-omics cohorts with planted clusters,
//! missing cells and cluster-dependent survival.
//!
//! All randomness comes from one ChaCha8 stream seeded with
//! [`SynthSpec::seed`], consumed in a fixed order: cluster labels, then the
//! three matrices (values, high-missingness features, missing cells), then
//! survival. ChaCha8 is a fully specified stream cipher, so the output is
//! reproducible across platforms.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clustering::Partition;
use crate::error::{OmicsError, Result};
use crate::numkernel::RealMatrix;
use crate::preprocess::{OmicsKind, OmicsMatrix};
use crate::survival::SurvivalRecord;

/// Hazard of the lowest-risk cluster.
const BASE_HAZARD: f64 = 0.1;

/// The three generated omics kinds, in output order.
pub const KINDS: [OmicsKind; 3] = [
    OmicsKind::GeneExpression,
    OmicsKind::Mirna,
    OmicsKind::Methylation,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub k: usize,
    /// Feature counts for gene expression, miRNA and methylation.
    pub dims: [usize; 3],
    /// Mean shift of informative features, in within-cluster standard
    /// deviations.
    pub separation: f64,
    /// Share of features that carry no cluster signal.
    pub noise_features_fraction: f64,
    /// Probability that a cell is missing (completely at random).
    pub missing_rate: f64,
    /// Share of features given [`SynthSpec::high_missing_rate`] instead.
    pub high_missing_fraction: f64,
    pub high_missing_rate: f64,
    /// Ratio between the highest and lowest cluster hazards.
    pub hazard_ratio: f64,
    /// Probability that a subject is censored before its event.
    pub censoring_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 150,
            k: 3,
            dims: [120, 60, 90],
            separation: 8.0,
            noise_features_fraction: 0.5,
            missing_rate: 0.05,
            high_missing_fraction: 0.10,
            high_missing_rate: 0.5,
            hazard_ratio: 3.0,
            censoring_rate: 0.2,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(OmicsError::Argument(msg));
        if self.k == 0 || self.n < self.k {
            return fail(format!("need n >= k >= 1, got n = {}, k = {}", self.n, self.k));
        }
        if self.dims.contains(&0) {
            return fail("every omics matrix needs at least one feature".into());
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) {
            return fail(format!("separation must be nonnegative, got {}", self.separation));
        }
        for (name, v) in [
            ("noise_features_fraction", self.noise_features_fraction),
            ("missing_rate", self.missing_rate),
            ("high_missing_fraction", self.high_missing_fraction),
            ("high_missing_rate", self.high_missing_rate),
            ("censoring_rate", self.censoring_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.hazard_ratio >= 1.0 && self.hazard_ratio.is_finite()) {
            return fail(format!("hazard_ratio must be >= 1, got {}", self.hazard_ratio));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub sample_ids: Vec<String>,
    /// Gene expression, miRNA, methylation.
    pub omics: [OmicsMatrix; 3],
    pub labels: Partition,
    /// Planted cluster of each sample; cluster `c` has hazard
    /// `base · hazard_ratio^(c / (k − 1))`.
    pub clusters: Vec<usize>,
    pub records: Vec<SurvivalRecord>,
}

pub fn sample_id(i: usize, n: usize) -> String {
    let width = n.to_string().len().max(4);
    format!("S{:0width$}", i + 1)
}

fn feature_prefix(kind: OmicsKind) -> &'static str {
    match kind {
        OmicsKind::GeneExpression => "ge",
        OmicsKind::Mirna => "mir",
        OmicsKind::Methylation => "meth",
        OmicsKind::Other => "feat",
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n;
    let sample_ids: Vec<String> = (0..n).map(|i| sample_id(i, n)).collect();

    let mut clusters: Vec<usize> = (0..n).map(|i| i % spec.k).collect();
    clusters.shuffle(&mut rng);

    let mut omics = Vec::with_capacity(3);
    for (kind, &p) in KINDS.iter().zip(&spec.dims) {
        omics.push(generate_matrix(spec, *kind, p, &clusters, &sample_ids, &mut rng)?);
    }

    let exp = Exp::new(1.0).expect("unit rate");
    let records = clusters
        .iter()
        .map(|&c| {
            let position = if spec.k > 1 {
                c as f64 / (spec.k - 1) as f64
            } else {
                0.0
            };
            let hazard = BASE_HAZARD * spec.hazard_ratio.powf(position);
            let event_time: f64 = exp.sample(&mut rng) / hazard;
            let censored = rng.random_bool(spec.censoring_rate);
            let cut: f64 = rng.random();
            let time = if censored { event_time * cut } else { event_time };
            SurvivalRecord::new(time.max(1e-9), !censored)
        })
        .collect::<Result<Vec<_>>>()?;

    let [ge, mir, meth]: [OmicsMatrix; 3] = omics.try_into().expect("three matrices");
    Ok(SynthData {
        sample_ids,
        omics: [ge, mir, meth],
        labels: Partition::from_labels(&clusters),
        clusters,
        records,
    })
}

fn generate_matrix(
    spec: &SynthSpec,
    kind: OmicsKind,
    p: usize,
    clusters: &[usize],
    sample_ids: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<OmicsMatrix> {
    let n = clusters.len();
    let noise = (spec.noise_features_fraction * p as f64).round() as usize;
    let informative = p - noise.min(p);
    let mut values = RealMatrix::from_fn(n, p, |i, f| {
        let z: f64 = StandardNormal.sample(rng);
        if f < informative && clusters[i] == f % spec.k {
            z + spec.separation
        } else {
            z
        }
    });

    let mut order: Vec<usize> = (0..p).collect();
    order.shuffle(rng);
    let n_high = (spec.high_missing_fraction * p as f64).round() as usize;
    let mut rate = vec![spec.missing_rate; p];
    for &f in &order[..n_high.min(p)] {
        rate[f] = spec.high_missing_rate;
    }
    for i in 0..n {
        for f in 0..p {
            if rng.random_bool(rate[f]) {
                values.row_mut(i)[f] = f64::NAN;
            }
        }
    }

    let prefix = feature_prefix(kind);
    let width = p.to_string().len().max(4);
    OmicsMatrix::new(
        values,
        sample_ids.to_vec(),
        (0..p).map(|f| format!("{prefix}_{:0width$}", f + 1)).collect(),
        kind,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(m: &OmicsMatrix) -> Vec<u64> {
        m.values().as_slice().iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn deterministic() {
        let spec = SynthSpec::default();
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        for (x, y) in a.omics.iter().zip(&b.omics) {
            assert_eq!(bits(x), bits(y));
        }
        assert_eq!(a.records, b.records);
        assert_eq!(a.clusters, b.clusters);
        let c = generate(&SynthSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(bits(&a.omics[0]), bits(&c.omics[0]));
    }

    #[test]
    fn balanced_clusters() {
        let data = generate(&SynthSpec { n: 100, k: 3, ..Default::default() }).unwrap();
        let sizes = data.labels.sizes();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        assert!(hi - lo <= 1, "{sizes:?}");
    }

    #[test]
    fn missing_fraction_near_rate() {
        let spec = SynthSpec {
            high_missing_fraction: 0.0,
            missing_rate: 0.05,
            dims: [200, 200, 200],
            ..Default::default()
        };
        let data = generate(&spec).unwrap();
        for m in &data.omics {
            let frac = m.missing_count() as f64 / (m.n_samples() * m.n_features()) as f64;
            assert!((frac - 0.05).abs() <= 0.01, "{frac}");
        }
    }

    #[test]
    fn hazard_ordering() {
        let spec = SynthSpec {
            n: 900,
            censoring_rate: 0.0,
            ..Default::default()
        };
        let data = generate(&spec).unwrap();
        let mut mean = vec![0.0; 3];
        let mut count = vec![0.0; 3];
        for (&c, r) in data.clusters.iter().zip(&data.records) {
            mean[c] += r.time;
            count[c] += 1.0;
        }
        let mean: Vec<f64> = mean.iter().zip(&count).map(|(m, c)| m / c).collect();
        // higher cluster index means higher hazard, so shorter survival
        assert!(mean[0] > mean[1] && mean[1] > mean[2], "{mean:?}");
    }

    #[test]
    fn identifiers_and_shapes() {
        let data = generate(&SynthSpec::default()).unwrap();
        assert_eq!(data.sample_ids[0], "S0001");
        assert_eq!(data.omics[0].feature_ids()[0], "ge_0001");
        assert_eq!(data.omics[1].feature_ids()[0], "mir_0001");
        assert_eq!(data.omics[2].feature_ids()[0], "meth_0001");
        assert_eq!(data.omics[2].n_features(), 90);
        assert_eq!(data.records.len(), 150);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&SynthSpec { n: 2, k: 3, ..Default::default() }).is_err());
        assert!(generate(&SynthSpec { missing_rate: 1.5, ..Default::default() }).is_err());
        assert!(generate(&SynthSpec { hazard_ratio: 0.5, ..Default::default() }).is_err());
        assert!(generate(&SynthSpec { dims: [3, 0, 3], ..Default::default() }).is_err());
    }
}
