//! Entropy-weighted fusion of several affinity matrices into one sparse
//! network `S`, and the three-stage schedule built on top of it.
//!
//! The optimizer minimizes
//!
//! ```text
//! J(S, F, α) = −Σ_l α_l ⟨A_l, S⟩ + ½ Σ_l α_l ‖A_l‖²_F + β ‖S‖²_F
//!              + λ tr(Fᵀ (I − S) F) + γ Σ_l α_l ln α_l
//! ```
//!
//! subject to every row of `S` lying on the probability simplex (with a zero
//! diagonal), `FᵀF = I_c` and `α` on the simplex. Each block update is an exact
//! minimizer with the other two fixed, so `J` never increases.

use rayon::prelude::*;
use serde::Serialize;

use crate::affinity::{affinity_from_distance, default_k1, AffinityMatrix, DistanceMatrix};
use crate::error::{OmicsError, Result};
use crate::numkernel::{project_row_simplex, sym_eig, EigenWhich, RealMatrix};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Lower bound applied to a neighbour-derived γ of zero (all distances equal).
pub const GAMMA_FLOOR: f64 = 1e-10;
pub const STAGE1_K2_RANGE: (usize, usize) = (2, 100);
pub const STAGE3_K2_RANGE: (usize, usize) = (2, 100);

/// Number of spectral vectors for a target cluster count: two clusters use 3.
pub fn eigenvector_count(cluster_count: usize) -> usize {
    if cluster_count == 2 {
        3
    } else {
        cluster_count.max(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionConfig {
    /// Number of spectral vectors `C`.
    pub c: usize,
    /// Regularization strength; also used for `β`.
    pub gamma: f64,
    /// `λ` of the trace term.
    pub trace_weight: f64,
    pub max_iter: usize,
    /// Relative objective change below which iteration stops.
    pub tol: f64,
    /// Neighbour count that produced `gamma` (bookkeeping only).
    pub k2: usize,
}

impl FusionConfig {
    /// Defaults for a target cluster count: `λ = γ`, 100 iterations,
    /// relative tolerance `1e-6`.
    pub fn for_clusters(cluster_count: usize, gamma: f64, k2: usize) -> Self {
        Self {
            c: eigenvector_count(cluster_count),
            gamma,
            trace_weight: gamma,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            k2,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.c < 2 || self.c > n {
            return Err(OmicsError::Argument(format!(
                "eigenvector count must lie in [2, n], got {} with n = {n}",
                self.c
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(OmicsError::Argument(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.trace_weight > 0.0 && self.trace_weight.is_finite()) {
            return Err(OmicsError::Argument(format!(
                "trace weight must be positive, got {}",
                self.trace_weight
            )));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(OmicsError::Argument("max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FusionState {
    /// Fused network; rows on the simplex, zero diagonal.
    pub s: RealMatrix,
    /// `n × c` spectral factor with orthonormal columns.
    pub f: RealMatrix,
    /// View weights on the simplex.
    pub alpha: Vec<f64>,
    /// Objective after initialization and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `γ = (1/N) Σ_j Σ_{n ≤ k2} (s²_{j,k2+1} − s²_{j,n})`, with `s_{j,·}` the
/// ascending off-diagonal distances of row `j`.
pub fn gamma_from_neighbors(d: &DistanceMatrix, k2: usize) -> Result<f64> {
    let n = d.n();
    if k2 == 0 || n < 3 || k2 > n - 2 {
        return Err(OmicsError::Argument(format!(
            "k2 must lie in [1, n-2], got {k2} with n = {n}"
        )));
    }
    gamma_from_sorted_rows(&d.sorted_neighbor_distances(), k2)
}

/// [`gamma_from_neighbors`] on rows that are already sorted ascending.
pub fn gamma_from_sorted_rows(rows: &[Vec<f64>], k2: usize) -> Result<f64> {
    if rows.is_empty() || k2 == 0 || rows.iter().any(|r| r.len() < k2 + 1) {
        return Err(OmicsError::Argument(format!(
            "k2 = {k2} needs at least {} neighbours per row",
            k2 + 1
        )));
    }
    let total: f64 = rows
        .iter()
        .map(|r| {
            let far = r[k2] * r[k2];
            r[..k2].iter().map(|s| far - s * s).sum::<f64>()
        })
        .sum();
    Ok((total / rows.len() as f64).max(0.0))
}

/// `rr(i) = mean_j (i·s_{j,i+1} − Σ_{l=2}^{i+1} s_{j,l}) / 2` for each `i`
/// in `range` (1-based `s`); returns the maximizing `i` (smallest on ties)
/// and every value.
pub fn rr_select_k2(d: &DistanceMatrix, range: (usize, usize)) -> Result<(usize, Vec<f64>)> {
    let n = d.n();
    let (lo, hi) = range;
    if lo > hi {
        return Err(OmicsError::Argument(format!("empty k2 range [{lo}, {hi}]")));
    }
    if lo < 2 || n < 4 || hi > n - 2 {
        return Err(OmicsError::Argument(format!(
            "k2 range [{lo}, {hi}] is outside [2, {}]",
            n.saturating_sub(2)
        )));
    }
    rr_from_sorted_rows(&d.sorted_neighbor_distances(), range)
}

/// [`rr_select_k2`] on rows that are already sorted ascending.
pub fn rr_from_sorted_rows(rows: &[Vec<f64>], range: (usize, usize)) -> Result<(usize, Vec<f64>)> {
    let (lo, hi) = range;
    if lo > hi || lo == 0 || rows.is_empty() || rows.iter().any(|r| r.len() < hi + 1) {
        return Err(OmicsError::Argument(format!("invalid k2 range [{lo}, {hi}]")));
    }
    let values: Vec<f64> = (lo..=hi)
        .map(|i| {
            rows.iter()
                .map(|r| {
                    // r is 0-based: s_{j,i+1} = r[i], s_{j,2..=i+1} = r[1..=i]
                    (i as f64 * r[i] - r[1..=i].iter().sum::<f64>()) / 2.0
                })
                .sum::<f64>()
                / rows.len() as f64
        })
        .collect();
    let mut best = 0;
    for (idx, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = idx;
        }
    }
    Ok((lo + best, values))
}

/// `d = 1 − mean_l A_l` off the diagonal, the distance scale shared by the
/// `k2` heuristics.
pub fn mean_affinity_distance(affs: &[&AffinityMatrix]) -> Result<DistanceMatrix> {
    let n = check_inputs(affs)?;
    let l = affs.len() as f64;
    let values = RealMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (1.0 - affs.iter().map(|a| a.get(i, j)).sum::<f64>() / l).max(0.0)
        }
    });
    DistanceMatrix::new(values)
}

/// Turns a fused network back into an affinity: `d = 1 − S_sym / max(S_sym)`
/// with a zero diagonal, then the local-scale kernel with neighbourhood `k1`.
pub fn rekernelize(s: &RealMatrix, k1: usize) -> Result<AffinityMatrix> {
    let sym = s.symmetrized();
    let n = sym.rows();
    let max = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| sym[(i, j)])
        .fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(OmicsError::DegenerateInput(
            "fused network has no off-diagonal mass".into(),
        ));
    }
    let d = RealMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (1.0 - sym[(i, j)] / max).max(0.0)
        }
    });
    affinity_from_distance(&DistanceMatrix::new(d)?, k1)
}

fn check_inputs(affs: &[&AffinityMatrix]) -> Result<usize> {
    let first = affs
        .first()
        .ok_or_else(|| OmicsError::Argument("no affinity matrices to fuse".into()))?;
    let n = first.n();
    if let Some(bad) = affs.iter().find(|a| a.n() != n) {
        return Err(OmicsError::Argument(format!(
            "affinity matrices disagree in size: {n} vs {}",
            bad.n()
        )));
    }
    Ok(n)
}

/// Frozen quantities of one fusion problem.
struct Problem<'a> {
    affs: &'a [&'a AffinityMatrix],
    norms_sq: Vec<f64>,
    cfg: &'a FusionConfig,
    n: usize,
}

impl Problem<'_> {
    fn beta(&self) -> f64 {
        self.cfg.gamma
    }

    fn inner(&self, l: usize, s: &RealMatrix) -> f64 {
        self.affs[l]
            .as_matrix()
            .as_slice()
            .iter()
            .zip(s.as_slice())
            .map(|(a, b)| a * b)
            .sum()
    }

    /// `Σ_{j,n} S_{jn} (F Fᵀ)_{jn}`.
    fn spectral_overlap(&self, s: &RealMatrix, f: &RealMatrix) -> f64 {
        let mut total = 0.0;
        for j in 0..self.n {
            let fj = f.row(j);
            for (m, &sv) in s.row(j).iter().enumerate() {
                if sv != 0.0 {
                    total += sv * fj.iter().zip(f.row(m)).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
        total
    }

    fn objective(&self, s: &RealMatrix, f: &RealMatrix, alpha: &[f64]) -> f64 {
        let cfg = self.cfg;
        let fit: f64 = (0..alpha.len())
            .map(|l| alpha[l] * (-self.inner(l, s) + 0.5 * self.norms_sq[l]))
            .sum();
        let ridge = self.beta() * s.as_slice().iter().map(|v| v * v).sum::<f64>();
        let trace = cfg.trace_weight * (cfg.c as f64 - self.spectral_overlap(s, f));
        let entropy: f64 = alpha
            .iter()
            .filter(|&&a| a > 0.0)
            .map(|&a| cfg.gamma * a * a.ln())
            .sum();
        fit + ridge + trace + entropy
    }

    fn weighted_mean(&self, alpha: &[f64]) -> RealMatrix {
        let mut out = RealMatrix::zeros(self.n, self.n);
        for (a, w) in self.affs.iter().zip(alpha) {
            for (o, v) in out.as_mut_slice().iter_mut().zip(a.as_matrix().as_slice()) {
                *o += w * v;
            }
        }
        out
    }

    /// Projects every row of `v` (scaled by `scale`) onto the simplex over
    /// its off-diagonal entries.
    fn project_rows(&self, v: &RealMatrix, scale: f64) -> RealMatrix {
        let n = self.n;
        let mut s = RealMatrix::zeros(n, n);
        let mut buf = Vec::with_capacity(n - 1);
        for j in 0..n {
            buf.clear();
            buf.extend(
                v.row(j)
                    .iter()
                    .enumerate()
                    .filter(|&(m, _)| m != j)
                    .map(|(_, x)| x * scale),
            );
            let p = project_row_simplex(&buf);
            let row = s.row_mut(j);
            let mut it = p.into_iter();
            for (m, out) in row.iter_mut().enumerate() {
                if m != j {
                    *out = it.next().expect("n-1 projected entries");
                }
            }
        }
        s
    }

    fn update_s(&self, f: &RealMatrix, alpha: &[f64]) -> RealMatrix {
        let mut v = self.weighted_mean(alpha);
        let lambda = self.cfg.trace_weight;
        for j in 0..self.n {
            let fj = f.row(j).to_vec();
            for m in 0..self.n {
                let ff: f64 = fj.iter().zip(f.row(m)).map(|(a, b)| a * b).sum();
                let row = v.row_mut(j);
                row[m] += lambda * ff;
            }
        }
        self.project_rows(&v, 1.0 / (2.0 * self.beta()))
    }

    fn update_f(&self, s: &RealMatrix) -> Result<RealMatrix> {
        // the c smallest eigenvectors of I − S_sym are the c largest of S_sym
        Ok(sym_eig(&s.symmetrized(), self.cfg.c, EigenWhich::Largest)?.vectors)
    }

    fn update_alpha(&self, s: &RealMatrix) -> Vec<f64> {
        let energies: Vec<f64> = (0..self.affs.len())
            .map(|l| -self.inner(l, s) + 0.5 * self.norms_sq[l])
            .collect();
        entropic_weights(&energies, self.cfg.gamma)
    }
}

/// `α_l ∝ exp(−e_l / γ)`, evaluated stably.
pub fn entropic_weights(energies: &[f64], gamma: f64) -> Vec<f64> {
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - min) / gamma).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// View energies `e_l = −⟨A_l, S⟩ + ½‖A_l‖²_F` whose softmax gives `α`.
pub fn view_energies(affs: &[&AffinityMatrix], s: &RealMatrix) -> Vec<f64> {
    affs.iter()
        .map(|a| {
            let m = a.as_matrix().as_slice();
            let inner: f64 = m.iter().zip(s.as_slice()).map(|(x, y)| x * y).sum();
            let norm: f64 = m.iter().map(|x| x * x).sum();
            -inner + 0.5 * norm
        })
        .collect()
}

/// Alternating minimization of the fusion objective: `S`, then `F`, then `α`
/// per iteration.
pub fn fuse_affinities(affs: &[&AffinityMatrix], cfg: &FusionConfig) -> Result<FusionState> {
    let n = check_inputs(affs)?;
    if n < 3 {
        return Err(OmicsError::Argument(format!("fusion needs at least 3 samples, got {n}")));
    }
    cfg.validate(n)?;
    let problem = Problem {
        affs,
        norms_sq: affs
            .iter()
            .map(|a| a.as_matrix().as_slice().iter().map(|x| x * x).sum())
            .collect(),
        cfg,
        n,
    };

    let mut alpha = vec![1.0 / affs.len() as f64; affs.len()];
    let mut s = problem.project_rows(&problem.weighted_mean(&alpha), 1.0);
    let mut f = problem.update_f(&s)?;
    let initial = problem.objective(&s, &f, &alpha);
    if !initial.is_finite() {
        return Err(OmicsError::Numerical("fusion objective is not finite at iteration 0".into()));
    }
    let mut trace = vec![initial];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        s = problem.update_s(&f, &alpha);
        f = problem
            .update_f(&s)
            .map_err(|e| OmicsError::Numerical(format!("iteration {iterations}: {e}")))?;
        alpha = problem.update_alpha(&s);
        let obj = problem.objective(&s, &f, &alpha);
        if !obj.is_finite() {
            return Err(OmicsError::Numerical(format!(
                "fusion objective is not finite at iteration {iterations}"
            )));
        }
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(obj);
        if (prev - obj).abs() <= cfg.tol * prev.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    Ok(FusionState {
        s,
        f,
        alpha,
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Stage-3 fusion result for one `k2`. A failed run is kept as its error.
#[derive(Debug, Clone)]
pub struct Stage3Candidate {
    pub k2: usize,
    pub gamma: f64,
    pub outcome: Result<FusionState>,
    /// `λ_C − λ_{C+1}` of the symmetrized fused network, when it succeeded.
    pub eigengap: Option<f64>,
}

/// Parameters chosen for stage 1 or stage 2.
#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub k2_range: (usize, usize),
    pub k2: usize,
    pub rr_values: Vec<f64>,
    pub gamma: f64,
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct ThreeStageConfig {
    pub cluster_count: usize,
    pub stage1_k2_range: (usize, usize),
    /// Defaults to `[2, n + 2]`.
    pub stage2_k2_range: Option<(usize, usize)>,
    pub stage3_k2_range: (usize, usize),
    /// Neighbourhood for re-kernelizing stage outputs; defaults to
    /// `round(sqrt(n))`.
    pub k1: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
}

impl ThreeStageConfig {
    pub fn new(cluster_count: usize) -> Self {
        Self {
            cluster_count,
            stage1_k2_range: STAGE1_K2_RANGE,
            stage2_k2_range: None,
            stage3_k2_range: STAGE3_K2_RANGE,
            k1: None,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }

    fn fusion_config(&self, gamma: f64, k2: usize) -> FusionConfig {
        FusionConfig {
            max_iter: self.max_iter,
            tol: self.tol,
            ..FusionConfig::for_clusters(self.cluster_count, gamma.max(GAMMA_FLOOR), k2)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThreeStageOutput {
    pub stage1: StageRecord,
    pub stage2: StageRecord,
    /// Re-kernelized stage-1 and stage-2 networks, the stage-3 inputs.
    pub stage_affinities: [AffinityMatrix; 2],
    pub candidates: Vec<Stage3Candidate>,
    /// Index into `candidates` of the selected network.
    pub chosen: usize,
}

impl ThreeStageOutput {
    pub fn chosen_candidate(&self) -> &Stage3Candidate {
        &self.candidates[self.chosen]
    }

    pub fn final_state(&self) -> &FusionState {
        self.chosen_candidate()
            .outcome
            .as_ref()
            .expect("chosen candidate succeeded")
    }
}

/// Clamps `range` into `[2, n − 2]`; `None` if nothing is left.
fn clamp_range(range: (usize, usize), n: usize) -> Option<(usize, usize)> {
    let lo = range.0.max(2);
    let hi = range.1.min(n.saturating_sub(2));
    (lo <= hi).then_some((lo, hi))
}

fn run_stage(
    name: &str,
    affs: &[&AffinityMatrix],
    range: (usize, usize),
    cfg: &ThreeStageConfig,
) -> Result<(StageRecord, FusionState)> {
    let label = |e: OmicsError| e.in_stage(name);
    let n = check_inputs(affs).map_err(label)?;
    let range = clamp_range(range, n)
        .ok_or_else(|| label(OmicsError::Argument(format!("no valid k2 for n = {n}"))))?;
    let d = mean_affinity_distance(affs).map_err(label)?;
    let (k2, rr_values) = rr_select_k2(&d, range).map_err(label)?;
    let gamma = gamma_from_neighbors(&d, k2).map_err(label)?;
    let fcfg = cfg.fusion_config(gamma, k2);
    let state = fuse_affinities(affs, &fcfg).map_err(label)?;
    Ok((
        StageRecord {
            k2_range: range,
            k2,
            rr_values,
            gamma: fcfg.gamma,
            alpha: state.alpha.clone(),
            iterations: state.iterations,
            converged: state.converged,
        },
        state,
    ))
}

fn eigengap(s: &RealMatrix, c: usize) -> Result<f64> {
    let eig = sym_eig(&s.symmetrized(), c + 1, EigenWhich::Largest)?;
    Ok(eig.values[c - 1] - eig.values[c])
}

/// Fuses the intra-dataset affinities (stage 1) and the CCA affinities
/// (stage 2) separately, re-kernelizes both outputs, then fuses those two
/// for every `k2` of the stage-3 range (stage 3).
///
/// Stages 1 and 2 pick `k2` by [`rr_select_k2`]. Among the stage-3
/// candidates the one with the largest eigengap `λ_C − λ_{C+1}` of its
/// symmetrized network is selected (smallest `k2` on ties).
pub fn three_stage_fuse(
    intra: &[AffinityMatrix; 3],
    inter: &[AffinityMatrix; 6],
    cfg: &ThreeStageConfig,
) -> Result<ThreeStageOutput> {
    let intra_refs: Vec<&AffinityMatrix> = intra.iter().collect();
    let inter_refs: Vec<&AffinityMatrix> = inter.iter().collect();
    let n = check_inputs(&intra_refs)?;
    if inter_refs.iter().any(|a| a.n() != n) {
        return Err(OmicsError::Argument(
            "intra and inter affinities cover different sample counts".into(),
        ));
    }
    let k1 = cfg.k1.unwrap_or_else(|| default_k1(n));

    let (stage1, stage2) = rayon::join(
        || run_stage("fusion stage 1", &intra_refs, cfg.stage1_k2_range, cfg),
        || {
            let range = cfg.stage2_k2_range.unwrap_or((2, n + 2));
            run_stage("fusion stage 2", &inter_refs, range, cfg)
        },
    );
    let (stage1, state1) = stage1?;
    let (stage2, state2) = stage2?;
    let rescaled = [
        rekernelize(&state1.s, k1).map_err(|e| e.in_stage("fusion stage 1"))?,
        rekernelize(&state2.s, k1).map_err(|e| e.in_stage("fusion stage 2"))?,
    ];

    let stage3 = |e: OmicsError| e.in_stage("fusion stage 3");
    let range = clamp_range(cfg.stage3_k2_range, n)
        .ok_or_else(|| stage3(OmicsError::Argument(format!("no valid k2 for n = {n}"))))?;
    let pair: Vec<&AffinityMatrix> = rescaled.iter().collect();
    let d = mean_affinity_distance(&pair).map_err(stage3)?;
    let sorted = d.sorted_neighbor_distances();
    let c = eigenvector_count(cfg.cluster_count);
    let candidates: Vec<Stage3Candidate> = (range.0..=range.1)
        .into_par_iter()
        .map(|k2| {
            let gamma = gamma_from_sorted_rows(&sorted, k2).unwrap_or(0.0).max(GAMMA_FLOOR);
            let outcome = fuse_affinities(&pair, &cfg.fusion_config(gamma, k2))
                .map_err(|e| e.in_stage(format!("fusion stage 3 (k2 = {k2})")));
            let eigengap = outcome.as_ref().ok().and_then(|st| {
                if c < n {
                    eigengap(&st.s, c).ok()
                } else {
                    None
                }
            });
            Stage3Candidate {
                k2,
                gamma,
                outcome,
                eigengap,
            }
        })
        .collect();

    let chosen = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.outcome.is_ok())
        .fold(None::<(usize, f64)>, |best, (i, cand)| {
            let gap = cand.eigengap.unwrap_or(f64::NEG_INFINITY);
            match best {
                Some((_, g)) if g >= gap => best,
                _ => Some((i, gap)),
            }
        })
        .map(|(i, _)| i)
        .ok_or_else(|| {
            let first = candidates
                .iter()
                .find_map(|c| c.outcome.as_ref().err().cloned())
                .unwrap_or_else(|| OmicsError::Argument("no stage-3 candidates".into()));
            stage3(first)
        })?;

    Ok(ThreeStageOutput {
        stage1,
        stage2,
        stage_affinities: rescaled,
        candidates,
        chosen,
    })
}
