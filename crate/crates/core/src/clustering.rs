//! K-means++ partitioning of the fused network and the ARI / NMI agreement
//! scores used to evaluate it.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{OmicsError, Result};
use crate::fusion::{FusionState, Stage3Candidate};
use crate::numkernel::RealMatrix;

const MAX_LLOYD_ITER: usize = 300;
const SHIFT_TOL: f64 = 1e-8;
pub const DEFAULT_RESTARTS: usize = 10;

/// Hard assignment of `n` items to `k` nonempty clusters labelled `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Relabels arbitrary labels densely, in order of first appearance.
    pub fn from_labels<L: Copy + Eq + std::hash::Hash>(raw: &[L]) -> Self {
        let mut map = HashMap::new();
        let labels = raw
            .iter()
            .map(|l| {
                let next = map.len();
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Self {
            labels,
            k: map.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Reorders items: item `i` of the result is item `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let raw: Vec<usize> = order.iter().map(|&i| self.labels[i]).collect();
        Self::from_labels(&raw)
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub partition: Partition,
    /// Within-cluster sum of squared distances.
    pub inertia: f64,
    pub centroids: RealMatrix,
}

/// K-means with D²-weighted seeding; the best of `restarts` independent runs
/// by inertia is returned. Deterministic for a given `seed`.
pub fn kmeans_pp(points: &RealMatrix, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(OmicsError::Argument(format!(
            "k-means needs 1 <= k <= n, got k = {k} with n = {n}"
        )));
    }
    if !points.is_finite() {
        return Err(OmicsError::Argument("k-means input is not finite".into()));
    }
    let runs: Vec<(Vec<usize>, f64, RealMatrix)> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            lloyd(points, k, &mut rng)
        })
        .collect();
    let (labels, inertia, centroids) = runs
        .into_iter()
        .reduce(|best, run| if run.1 < best.1 { run } else { best })
        .expect("at least one restart");
    Ok(KMeansFit {
        partition: Partition::from_labels(&labels),
        inertia,
        centroids,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn seed_centroids(points: &RealMatrix, k: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
    let n = points.rows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the last positive weight
            pick.unwrap_or_else(|| nearest.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(pick);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(pick)));
        }
    }
    points.select_rows(&chosen)
}

fn assign(points: &RealMatrix, centroids: &RealMatrix) -> (Vec<usize>, Vec<f64>) {
    (0..points.rows())
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for c in 0..centroids.rows() {
                let d = sq_dist(points.row(i), centroids.row(c));
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .unzip()
}

fn lloyd(points: &RealMatrix, k: usize, rng: &mut ChaCha8Rng) -> (Vec<usize>, f64, RealMatrix) {
    let (n, m) = points.shape();
    let mut centroids = seed_centroids(points, k, rng);
    let mut labels;
    let mut iter = 0;
    loop {
        iter += 1;
        let (mut assigned, mut dists) = assign(points, &centroids);
        repair_empty(points, &mut centroids, &mut assigned, &mut dists, k);
        labels = assigned;

        let mut updated = RealMatrix::zeros(k, m);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            counts[l] += 1;
            for (acc, v) in updated.row_mut(l).iter_mut().zip(points.row(i)) {
                *acc += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            for v in updated.row_mut(c) {
                *v /= count as f64;
            }
        }
        let shift = (0..k)
            .map(|c| sq_dist(updated.row(c), centroids.row(c)).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        if shift < SHIFT_TOL || iter >= MAX_LLOYD_ITER {
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(points.row(i), centroids.row(labels[i])))
        .sum();
    (labels, inertia, centroids)
}

/// Moves the point farthest from its centroid (taken from a cluster with
/// more than one member) into each empty cluster.
fn repair_empty(
    points: &RealMatrix,
    centroids: &mut RealMatrix,
    labels: &mut [usize],
    dists: &mut [f64],
    k: usize,
) {
    let mut counts = vec![0usize; k];
    for &l in labels.iter() {
        counts[l] += 1;
    }
    for c in 0..k {
        if counts[c] > 0 {
            continue;
        }
        let donor = (0..labels.len())
            .filter(|&i| counts[labels[i]] > 1)
            .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
            .expect("k <= n guarantees a cluster with spare members");
        counts[labels[donor]] -= 1;
        counts[c] += 1;
        labels[donor] = c;
        dists[donor] = 0.0;
        centroids.row_mut(c).copy_from_slice(points.row(donor));
    }
}

fn check_lengths(a: &Partition, b: &Partition) -> Result<()> {
    if a.len() != b.len() {
        return Err(OmicsError::Argument(format!(
            "partitions have different lengths: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn contingency(a: &Partition, b: &Partition) -> Vec<Vec<u64>> {
    let mut table = vec![vec![0u64; b.k()]; a.k()];
    for (&x, &y) in a.labels().iter().zip(b.labels()) {
        table[x][y] += 1;
    }
    table
}

fn pairs(count: u64) -> u64 {
    count * count.saturating_sub(1) / 2
}

/// Pair-count agreement corrected for chance:
/// `2(ad − bc) / ((a+b)(b+d) + (a+c)(c+d))` where `a` counts pairs together
/// in both partitions, `b` pairs together only in `a`, `c` pairs together
/// only in `b`, and `d` pairs apart in both.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    let table = contingency(a, b);
    let both: u64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let same_a: u64 = a.sizes().iter().map(|&s| pairs(s as u64)).sum();
    let same_b: u64 = b.sizes().iter().map(|&s| pairs(s as u64)).sum();
    let total = pairs(a.len() as u64);
    let pa = both as i128;
    let pb = (same_a - both) as i128;
    let pc = (same_b - both) as i128;
    let pd = total as i128 - pa - pb - pc;
    let denom = (pa + pb) * (pb + pd) + (pa + pc) * (pc + pd);
    if denom == 0 {
        // only reachable when both partitions are identical (or n < 2)
        return Ok(1.0);
    }
    Ok(2.0 * (pa * pd - pb * pc) as f64 / denom as f64)
}

/// Mutual information normalized by the larger of the two entropies,
/// natural logarithm.
pub fn nmi(a: &Partition, b: &Partition) -> Result<f64> {
    check_lengths(a, b)?;
    let n = a.len() as f64;
    if a.is_empty() {
        return Ok(1.0);
    }
    let entropy = |sizes: &[usize]| -> f64 {
        sizes
            .iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let p = s as f64 / n;
                -p * p.ln()
            })
            .sum()
    };
    let sa = a.sizes();
    let sb = b.sizes();
    let ha = entropy(&sa);
    let hb = entropy(&sb);
    let mut mi = 0.0;
    for (i, row) in contingency(a, b).iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let c = c as f64;
            mi += c / n * (n * c / (sa[i] as f64 * sb[j] as f64)).ln();
        }
    }
    let denom = ha.max(hb);
    if denom == 0.0 {
        // both partitions are a single cluster
        return Ok(1.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// What k-means++ runs on after fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterInput {
    /// Rows of the fused network `S`.
    #[default]
    FusedRows,
    /// Rows of the spectral factor `F`.
    SpectralFactor,
}

impl std::str::FromStr for ClusterInput {
    type Err = OmicsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fused_rows" | "s" => Ok(ClusterInput::FusedRows),
            "spectral_factor" | "f" => Ok(ClusterInput::SpectralFactor),
            _ => Err(OmicsError::Argument(format!("unknown cluster input `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub input: ClusterInput,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self {
            input: ClusterInput::FusedRows,
            seed: 0,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

pub fn cluster_fused(state: &FusionState, k: usize, opts: &ClusterOptions) -> Result<Partition> {
    let points = match opts.input {
        ClusterInput::FusedRows => &state.s,
        ClusterInput::SpectralFactor => &state.f,
    };
    Ok(kmeans_pp(points, k, opts.seed, opts.restarts)?.partition)
}

/// One row of a stage-3 `k2` sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k2: usize,
    pub ari: Option<f64>,
    pub nmi: Option<f64>,
    pub error: Option<String>,
}

/// Clusters every stage-3 candidate and scores it against `truth`. A failed
/// candidate yields a row carrying the error instead of aborting the sweep.
pub fn sweep_k2_metrics(
    candidates: &[Stage3Candidate],
    truth: &Partition,
    cluster_count: usize,
    opts: &ClusterOptions,
) -> Vec<SweepRow> {
    candidates
        .par_iter()
        .map(|cand| {
            let scored = cand
                .outcome
                .as_ref()
                .map_err(|e| e.clone())
                .and_then(|state| {
                    let labels = cluster_fused(state, cluster_count, opts)?;
                    Ok((ari(truth, &labels)?, nmi(truth, &labels)?))
                });
            match scored {
                Ok((a, n)) => SweepRow {
                    k2: cand.k2,
                    ari: Some(a),
                    nmi: Some(n),
                    error: None,
                },
                Err(e) => SweepRow {
                    k2: cand.k2,
                    ari: None,
                    nmi: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}
