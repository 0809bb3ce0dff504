//! Variational Bayesian Gaussian mixture with diagonal covariances.
//!
//! Priors: symmetric Dirichlet(1/M) on the weights and an independent
//! Normal-Gamma on every (component, dimension) mean/precision pair, centred
//! on the empirical mean with prior precision scale tied to the empirical
//! variance. Mean-field coordinate ascent alternates the conjugate
//! global-parameter update with the responsibility update, so the evidence
//! lower bound never decreases within a run. Two runs are made, from a
//! k-means++ start and from a single-component start, and the one with the
//! larger bound is kept.

use serde::Serialize;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::clustering::kmeans_pp;
use crate::error::{OmicsError, Result};
use crate::numkernel::RealMatrix;

/// Floor applied to reported component variances.
pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Components lighter than this do not count as effective.
pub const EFFECTIVE_WEIGHT: f64 = 1e-3;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct BgmmConfig {
    pub max_components: usize,
    pub max_iter: usize,
    /// Convergence threshold on the per-sample change of the lower bound.
    pub tol: f64,
    pub seed: u64,
}

impl Default for BgmmConfig {
    fn default() -> Self {
        Self {
            max_components: 10,
            max_iter: 500,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// Posterior-mean summary of a fitted mixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    /// `M × p` component means.
    #[serde(skip)]
    pub means: RealMatrix,
    /// `M × p` component variances, each at least [`VARIANCE_FLOOR`].
    #[serde(skip)]
    pub diag_variances: RealMatrix,
    pub effective_components: usize,
}

#[derive(Debug, Clone)]
pub struct BgmmFit {
    pub model: GmmModel,
    /// `n × M` posterior component memberships.
    pub responsibilities: RealMatrix,
    /// Lower bound after every global update.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

struct Prior {
    alpha0: f64,
    beta0: f64,
    mean0: Vec<f64>,
    a0: f64,
    b0: Vec<f64>,
}

struct Posterior {
    counts: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    mean: RealMatrix,
    a: Vec<f64>,
    b: RealMatrix,
    // sufficient statistics kept for the bound
    xbar: RealMatrix,
    scatter: RealMatrix,
}

/// Fits the mixture to the rows of `x` (samples × dimensions).
pub fn fit_bayesian_gmm(x: &RealMatrix, cfg: &BgmmConfig) -> Result<BgmmFit> {
    let (n, p) = x.shape();
    let m = cfg.max_components;
    if m == 0 {
        return Err(OmicsError::Argument("max_components must be positive".into()));
    }
    if n < m {
        return Err(OmicsError::Argument(format!(
            "{n} samples cannot support {m} mixture components"
        )));
    }
    if !x.is_finite() {
        return Err(OmicsError::Argument("mixture input is not finite".into()));
    }

    let prior = empirical_prior(x, m);
    // Coordinate ascent only finds a local optimum, and from a k-means start
    // it tends to keep spurious splits of a single cluster. A second run from
    // the everything-in-one-component start guards against that; the run
    // with the larger final bound wins.
    let mut best = run_from(x, initial_responsibilities(x, m, cfg.seed)?, &prior, cfg)?;
    if m > 1 {
        let mut single = RealMatrix::zeros(n, m);
        for i in 0..n {
            single[(i, 0)] = 1.0;
        }
        let alt = run_from(x, single, &prior, cfg)?;
        if alt.trace.last() > best.trace.last() {
            best = alt;
        }
    }
    let Run {
        resp,
        post,
        trace,
        converged,
    } = best;

    let total_alpha: f64 = post.alpha.iter().sum();
    let weights: Vec<f64> = post.alpha.iter().map(|a| a / total_alpha).collect();
    let effective_components = weights.iter().filter(|&&w| w >= EFFECTIVE_WEIGHT).count();
    let diag_variances = RealMatrix::from_fn(m, p, |k, d| {
        (post.b[(k, d)] / post.a[k]).max(VARIANCE_FLOOR)
    });
    Ok(BgmmFit {
        model: GmmModel {
            weights,
            means: post.mean,
            diag_variances,
            effective_components,
        },
        responsibilities: resp,
        elbo_trace: trace,
        converged,
    })
}

struct Run {
    resp: RealMatrix,
    post: Posterior,
    trace: Vec<f64>,
    converged: bool,
}

fn run_from(x: &RealMatrix, mut resp: RealMatrix, prior: &Prior, cfg: &BgmmConfig) -> Result<Run> {
    let n = x.rows();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut post = m_step(x, &resp, prior);
    for _ in 0..cfg.max_iter {
        let bound = elbo(x, &resp, &post, prior);
        if !bound.is_finite() {
            return Err(OmicsError::Numerical(format!(
                "mixture lower bound became non-finite after {} iterations",
                trace.len()
            )));
        }
        let done = trace
            .last()
            .is_some_and(|&prev: &f64| (bound - prev).abs() / n as f64 <= cfg.tol);
        trace.push(bound);
        if done {
            converged = true;
            break;
        }
        resp = e_step(x, &post);
        post = m_step(x, &resp, prior);
    }
    Ok(Run {
        resp,
        post,
        trace,
        converged,
    })
}

fn empirical_prior(x: &RealMatrix, m: usize) -> Prior {
    let (n, p) = x.shape();
    let mut mean0 = vec![0.0; p];
    for row in x.row_iter() {
        for (acc, v) in mean0.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for v in &mut mean0 {
        *v /= n as f64;
    }
    let mut var = vec![0.0; p];
    for row in x.row_iter() {
        for ((acc, v), mu) in var.iter_mut().zip(row).zip(&mean0) {
            *acc += (v - mu).powi(2);
        }
    }
    let a0 = 1.0;
    let b0 = var
        .iter()
        .map(|v| a0 * (v / n as f64).max(VARIANCE_FLOOR))
        .collect();
    Prior {
        alpha0: 1.0 / m as f64,
        beta0: 1.0,
        mean0,
        a0,
        b0,
    }
}

fn initial_responsibilities(x: &RealMatrix, m: usize, seed: u64) -> Result<RealMatrix> {
    let fit = kmeans_pp(x, m, seed, 1)?;
    let mut resp = RealMatrix::zeros(x.rows(), m);
    for (i, &label) in fit.partition.labels().iter().enumerate() {
        resp[(i, label)] = 1.0;
    }
    Ok(resp)
}

fn m_step(x: &RealMatrix, resp: &RealMatrix, prior: &Prior) -> Posterior {
    let (n, p) = x.shape();
    let m = resp.cols();
    let mut counts = vec![0.0; m];
    let mut xbar = RealMatrix::zeros(m, p);
    for i in 0..n {
        for k in 0..m {
            let r = resp[(i, k)];
            if r == 0.0 {
                continue;
            }
            counts[k] += r;
            for (acc, v) in xbar.row_mut(k).iter_mut().zip(x.row(i)) {
                *acc += r * v;
            }
        }
    }
    for k in 0..m {
        let nk = counts[k];
        for (d, v) in xbar.row_mut(k).iter_mut().enumerate() {
            *v = if nk > 0.0 { *v / nk } else { prior.mean0[d] };
        }
    }
    let mut scatter = RealMatrix::zeros(m, p);
    for i in 0..n {
        for k in 0..m {
            let r = resp[(i, k)];
            if r == 0.0 {
                continue;
            }
            for d in 0..p {
                scatter[(k, d)] += r * (x[(i, d)] - xbar[(k, d)]).powi(2);
            }
        }
    }
    for k in 0..m {
        let nk = counts[k];
        for v in scatter.row_mut(k) {
            *v = if nk > 0.0 { *v / nk } else { 0.0 };
        }
    }

    let alpha: Vec<f64> = counts.iter().map(|nk| prior.alpha0 + nk).collect();
    let beta: Vec<f64> = counts.iter().map(|nk| prior.beta0 + nk).collect();
    let a: Vec<f64> = counts.iter().map(|nk| prior.a0 + 0.5 * nk).collect();
    let mean = RealMatrix::from_fn(m, p, |k, d| {
        (prior.beta0 * prior.mean0[d] + counts[k] * xbar[(k, d)]) / beta[k]
    });
    let b = RealMatrix::from_fn(m, p, |k, d| {
        let nk = counts[k];
        let shift = xbar[(k, d)] - prior.mean0[d];
        prior.b0[d] + 0.5 * (nk * scatter[(k, d)] + prior.beta0 * nk * shift * shift / beta[k])
    });
    Posterior {
        counts,
        alpha,
        beta,
        mean,
        a,
        b,
        xbar,
        scatter,
    }
}

fn e_step(x: &RealMatrix, post: &Posterior) -> RealMatrix {
    let (n, p) = x.shape();
    let m = post.alpha.len();
    let digamma_total = digamma(post.alpha.iter().sum());
    let log_pi: Vec<f64> = post.alpha.iter().map(|&a| digamma(a) - digamma_total).collect();
    let mut resp = RealMatrix::zeros(n, m);
    let mut logs = vec![0.0; m];
    for i in 0..n {
        for k in 0..m {
            let psi_a = digamma(post.a[k]);
            let mut s = log_pi[k];
            for d in 0..p {
                let b = post.b[(k, d)];
                let e_log_tau = psi_a - b.ln();
                let e_tau = post.a[k] / b;
                let diff = x[(i, d)] - post.mean[(k, d)];
                s += 0.5 * e_log_tau - 0.5 * LN_2PI - 0.5 * (1.0 / post.beta[k] + e_tau * diff * diff);
            }
            logs[k] = s;
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let norm: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        for k in 0..m {
            resp[(i, k)] = (logs[k] - max).exp() / norm;
        }
    }
    resp
}

fn ln_dirichlet_norm(alpha: &[f64]) -> f64 {
    ln_gamma(alpha.iter().sum()) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
}

fn elbo(x: &RealMatrix, resp: &RealMatrix, post: &Posterior, prior: &Prior) -> f64 {
    let p = x.cols();
    let m = post.alpha.len();
    let digamma_total = digamma(post.alpha.iter().sum());
    let log_pi: Vec<f64> = post.alpha.iter().map(|&a| digamma(a) - digamma_total).collect();

    let mut likelihood = 0.0;
    let mut prior_mu_tau = 0.0;
    let mut entropy_mu_tau = 0.0;
    for k in 0..m {
        let nk = post.counts[k];
        let psi_a = digamma(post.a[k]);
        let ln_gamma_a = ln_gamma(post.a[k]);
        for d in 0..p {
            let b = post.b[(k, d)];
            let e_log_tau = psi_a - b.ln();
            let e_tau = post.a[k] / b;
            let mean_gap = post.xbar[(k, d)] - post.mean[(k, d)];
            likelihood += nk
                * (0.5 * e_log_tau
                    - 0.5 * LN_2PI
                    - 0.5 / post.beta[k]
                    - 0.5 * e_tau * (post.scatter[(k, d)] + mean_gap * mean_gap));

            let prior_gap = post.mean[(k, d)] - prior.mean0[d];
            prior_mu_tau += 0.5 * (prior.beta0.ln() - LN_2PI) + 0.5 * e_log_tau
                - 0.5 * prior.beta0 * (1.0 / post.beta[k] + e_tau * prior_gap * prior_gap)
                + prior.a0 * prior.b0[d].ln()
                - ln_gamma(prior.a0)
                + (prior.a0 - 1.0) * e_log_tau
                - prior.b0[d] * e_tau;

            entropy_mu_tau += 0.5 * (post.beta[k].ln() - LN_2PI) + 0.5 * e_log_tau - 0.5
                + post.a[k] * b.ln()
                - ln_gamma_a
                + (post.a[k] - 1.0) * e_log_tau
                - post.a[k];
        }
    }
    let assignment: f64 = post.counts.iter().zip(&log_pi).map(|(nk, lp)| nk * lp).sum();
    let prior_alpha = vec![prior.alpha0; m];
    let prior_pi = ln_dirichlet_norm(&prior_alpha)
        + (prior.alpha0 - 1.0) * log_pi.iter().sum::<f64>();
    let q_z: f64 = resp
        .as_slice()
        .iter()
        .filter(|&&r| r > 0.0)
        .map(|&r| r * r.ln())
        .sum();
    let q_pi = ln_dirichlet_norm(&post.alpha)
        + post
            .alpha
            .iter()
            .zip(&log_pi)
            .map(|(a, lp)| (a - 1.0) * lp)
            .sum::<f64>();
    likelihood + assignment + prior_pi + prior_mu_tau - q_z - q_pi - entropy_mu_tau
}
