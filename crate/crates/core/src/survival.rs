//! K-group log-rank test of cluster labels against survival outcomes,
//! reported as `−log10 p`.

use serde::{Deserialize, Serialize};

use crate::clustering::Partition;
use crate::error::{OmicsError, Result};
use crate::numkernel::{chi_square_sf, sym_eig, EigenWhich, RealMatrix};

/// `−log10(0.05)` rounded as used for reporting: results at or above this
/// are called significant.
pub const SIGNIFICANCE_THRESHOLD: f64 = 1.30;
/// Floor applied to `p` before taking the logarithm.
pub const P_FLOOR: f64 = 1e-300;

/// Follow-up of one subject: time to death or censoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub time: f64,
    /// `true` when death was observed, `false` when censored.
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(time: f64, event: bool) -> Result<Self> {
        if !(time > 0.0 && time.is_finite()) {
            return Err(OmicsError::Argument(format!(
                "survival time must be positive and finite, got {time}"
            )));
        }
        Ok(Self { time, event })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalReport {
    pub chi2: f64,
    /// Rank of the covariance of `O − E`; `k − 1` unless some group never
    /// contributes to a risk set.
    pub df: usize,
    pub p: f64,
    pub neg_log10_p: f64,
    pub significant: bool,
    pub threshold: f64,
    pub groups: usize,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
}

/// Observed and expected event counts per group and the covariance of their
/// difference, accumulated over distinct event times. Tied events at one
/// time share a single risk set.
fn tabulate(labels: &[usize], k: usize, records: &[SurvivalRecord]) -> (Vec<f64>, Vec<f64>, RealMatrix) {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].time.total_cmp(&records[b].time));

    let mut at_risk = vec![0.0; k];
    for &l in labels {
        at_risk[l] += 1.0;
    }
    let mut observed = vec![0.0; k];
    let mut expected = vec![0.0; k];
    let mut cov = RealMatrix::zeros(k, k);

    let mut start = 0;
    while start < order.len() {
        let t = records[order[start]].time;
        let mut end = start;
        let mut deaths = vec![0.0; k];
        let mut leaving = vec![0.0; k];
        while end < order.len() && records[order[end]].time == t {
            let i = order[end];
            leaving[labels[i]] += 1.0;
            if records[i].event {
                deaths[labels[i]] += 1.0;
            }
            end += 1;
        }
        let d: f64 = deaths.iter().sum();
        let n: f64 = at_risk.iter().sum();
        if d > 0.0 {
            for g in 0..k {
                observed[g] += deaths[g];
                expected[g] += d * at_risk[g] / n;
            }
            if n > 1.0 {
                let factor = d * (n - d) / (n - 1.0);
                for g in 0..k {
                    for h in 0..k {
                        let delta = if g == h { 1.0 } else { 0.0 };
                        cov.row_mut(g)[h] += factor * at_risk[g] / n * (delta - at_risk[h] / n);
                    }
                }
            }
        }
        for g in 0..k {
            at_risk[g] -= leaving[g];
        }
        start = end;
    }
    (observed, expected, cov)
}

/// Log-rank chi-square `(O − E)ᵀ V⁺ (O − E)` with the Moore-Penrose inverse
/// of the hypergeometric covariance `V`, and its p-value.
pub fn logrank_test(labels: &Partition, records: &[SurvivalRecord]) -> Result<SurvivalReport> {
    if labels.len() != records.len() {
        return Err(OmicsError::Argument(format!(
            "{} labels for {} survival records",
            labels.len(),
            records.len()
        )));
    }
    let k = labels.k();
    if k < 2 {
        return Err(OmicsError::Argument(
            "log-rank test needs at least two groups".into(),
        ));
    }
    if !records.iter().any(|r| r.event) {
        return Err(OmicsError::DegenerateInput("no observed events".into()));
    }
    let (observed, expected, cov) = tabulate(labels.labels(), k, records);
    let diff: Vec<f64> = observed.iter().zip(&expected).map(|(o, e)| o - e).collect();

    let eig = sym_eig(&cov, k, EigenWhich::Largest)?;
    let top = eig.values[0];
    if !(top > 0.0) {
        return Err(OmicsError::DegenerateInput(
            "log-rank covariance is zero".into(),
        ));
    }
    let mut chi2 = 0.0;
    let mut df = 0;
    for (c, &lambda) in eig.values.iter().enumerate() {
        if lambda <= 1e-10 * top {
            continue;
        }
        df += 1;
        let proj: f64 = (0..k).map(|g| eig.vectors[(g, c)] * diff[g]).sum();
        chi2 += proj * proj / lambda;
    }
    let chi2 = chi2.max(0.0);
    let p = chi_square_sf(chi2, df)?.clamp(0.0, 1.0);
    let neg_log10_p = -p.max(P_FLOOR).log10();
    Ok(SurvivalReport {
        chi2,
        df,
        p,
        neg_log10_p,
        significant: neg_log10_p >= SIGNIFICANCE_THRESHOLD,
        threshold: SIGNIFICANCE_THRESHOLD,
        groups: k,
        observed,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    fn all_events(times: &[f64]) -> Vec<SurvivalRecord> {
        times.iter().map(|&t| SurvivalRecord::new(t, true).unwrap()).collect()
    }

    #[test]
    fn hand_tabulation() {
        // risk sets (A, B) at t = 1..4: (3,3), (2,3), (1,3), (0,3)
        // E_A = 3/6 + 2/5 + 1/4 = 1.15, V = 1/4 + 6/25 + 3/16 = 0.6775
        let labels = Partition::from_labels(&[0, 0, 0, 1, 1, 1]);
        let recs = all_events(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = logrank_test(&labels, &recs).unwrap();
        let expected_chi2 = 1.85f64.powi(2) / 0.6775;
        assert!((r.chi2 - expected_chi2).abs() < 1e-10);
        assert!((r.observed[0] - 3.0).abs() < 1e-12);
        assert!((r.expected[0] - 1.15).abs() < 1e-12);
        assert_eq!(r.df, 1);
    }

    #[test]
    fn threshold_constant() {
        assert_eq!(SIGNIFICANCE_THRESHOLD, 1.30);
        assert!((-(0.05f64).log10() - SIGNIFICANCE_THRESHOLD).abs() < 0.01);
    }

    #[test]
    fn errors() {
        let recs = all_events(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            logrank_test(&Partition::from_labels(&[0, 0, 0]), &recs),
            Err(OmicsError::Argument(_))
        ));
        let censored: Vec<SurvivalRecord> =
            [1.0, 2.0, 3.0].iter().map(|&t| SurvivalRecord::new(t, false).unwrap()).collect();
        assert!(matches!(
            logrank_test(&Partition::from_labels(&[0, 1, 0]), &censored),
            Err(OmicsError::DegenerateInput(_))
        ));
        assert!(SurvivalRecord::new(0.0, true).is_err());
        assert!(SurvivalRecord::new(f64::NAN, true).is_err());
    }

    #[test]
    fn three_groups_have_two_df() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let exp = Exp::new(1.0).unwrap();
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let recs: Vec<SurvivalRecord> = (0..60)
            .map(|_| SurvivalRecord::new(exp.sample(&mut rng), rng.random_bool(0.8)).unwrap())
            .collect();
        let r = logrank_test(&Partition::from_labels(&labels), &recs).unwrap();
        assert_eq!(r.df, 2);
        assert!(r.chi2 >= 0.0 && (0.0..=1.0).contains(&r.p));
    }

    fn random_case(seed: u64, n: usize, k: usize) -> (Vec<usize>, Vec<SurvivalRecord>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
        let recs = (0..n)
            .map(|_| {
                // coarse grid so ties occur
                let t = (rng.random_range(1..20) as f64) * 0.5;
                SurvivalRecord::new(t, rng.random_bool(0.7)).unwrap()
            })
            .collect();
        (labels, recs)
    }

    proptest! {
        #[test]
        fn invariances(seed in 0u64..5000, k in 2usize..4) {
            let (labels, mut recs) = random_case(seed, 30, k);
            recs[0].event = true;
            let base = logrank_test(&Partition::from_labels(&labels), &recs).unwrap();

            let renamed: Vec<usize> = labels.iter().map(|l| (l + 1) % k).collect();
            let r = logrank_test(&Partition::from_labels(&renamed), &recs).unwrap();
            prop_assert!((r.chi2 - base.chi2).abs() < 1e-9);

            let warped: Vec<SurvivalRecord> = recs
                .iter()
                .map(|r| SurvivalRecord::new(r.time.powi(3) + 2.0 * r.time, r.event).unwrap())
                .collect();
            let r = logrank_test(&Partition::from_labels(&labels), &warped).unwrap();
            prop_assert!((r.chi2 - base.chi2).abs() < 1e-9);

            // moving a censoring time around beyond the last event changes no
            // risk set at any event time
            let last_event = recs.iter().filter(|r| r.event).map(|r| r.time).fold(0.0, f64::max);
            let mut ext_labels = labels.clone();
            ext_labels.push(0);
            let ext_labels = Partition::from_labels(&ext_labels);
            let mut extended = recs.clone();
            extended.push(SurvivalRecord::new(last_event + 1.0, false).unwrap());
            let near = logrank_test(&ext_labels, &extended).unwrap();
            extended.last_mut().unwrap().time = last_event + 100.0;
            let far = logrank_test(&ext_labels, &extended).unwrap();
            prop_assert!((near.chi2 - far.chi2).abs() < 1e-12);
            prop_assert!(base.chi2 >= 0.0);
            prop_assert!((0.0..=1.0).contains(&base.p));
        }
    }
}
