use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OmicsMatrix;
use crate::error::{OmicsError, Result};

/// Search interval for the transform exponent.
pub const LAMBDA_RANGE: (f64, f64) = (-5.0, 5.0);
const GRID_POINTS: usize = 101;
const GOLDEN_TOL: f64 = 1e-4;
const LAMBDA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMethod {
    BoxCox,
    YeoJohnson,
}

impl std::str::FromStr for PowerMethod {
    type Err = OmicsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box_cox" | "box-cox" => Ok(PowerMethod::BoxCox),
            "yeo_johnson" | "yeo-johnson" => Ok(PowerMethod::YeoJohnson),
            _ => Err(OmicsError::Argument(format!(
                "unknown power transform `{s}` (expected box_cox or yeo_johnson)"
            ))),
        }
    }
}

/// Fitted per-feature exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerTransformParams {
    pub method: PowerMethod,
    pub lambdas: Vec<f64>,
}

/// Box-Cox transform of a single positive value.
pub fn box_cox(x: f64, lambda: f64) -> f64 {
    if lambda.abs() < LAMBDA_EPS {
        x.ln()
    } else {
        (lambda * x.ln()).exp_m1() / lambda
    }
}

/// Yeo-Johnson transform of a single value.
pub fn yeo_johnson(x: f64, lambda: f64) -> f64 {
    if x >= 0.0 {
        if lambda.abs() < LAMBDA_EPS {
            x.ln_1p()
        } else {
            (lambda * x.ln_1p()).exp_m1() / lambda
        }
    } else {
        let two_minus = 2.0 - lambda;
        if two_minus.abs() < LAMBDA_EPS {
            -(-x).ln_1p()
        } else {
            -(two_minus * (-x).ln_1p()).exp_m1() / two_minus
        }
    }
}

fn transform(method: PowerMethod, x: f64, lambda: f64) -> f64 {
    match method {
        PowerMethod::BoxCox => box_cox(x, lambda),
        PowerMethod::YeoJohnson => yeo_johnson(x, lambda),
    }
}

/// Gaussian profile log-likelihood of the transformed sample, including the
/// log-Jacobian of the transform.
pub fn profile_log_likelihood(values: &[f64], lambda: f64, method: PowerMethod) -> f64 {
    let n = values.len() as f64;
    let transformed: Vec<f64> = values.iter().map(|&v| transform(method, v, lambda)).collect();
    let mean = transformed.iter().sum::<f64>() / n;
    let var = transformed.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    if !(var.is_finite() && var > 0.0) {
        return f64::NEG_INFINITY;
    }
    let log_jacobian: f64 = match method {
        PowerMethod::BoxCox => values.iter().map(|v| v.ln()).sum(),
        PowerMethod::YeoJohnson => values.iter().map(|v| v.signum() * v.abs().ln_1p()).sum(),
    };
    -0.5 * n * var.ln() + (lambda - 1.0) * log_jacobian
}

/// Maximum-likelihood exponent for one feature on `[-5, 5]`.
///
/// A 101-point grid locates the best cell; if the grid profile is unimodal a
/// golden-section search over the full interval follows, otherwise the search
/// is confined to the neighbourhood of the best grid point.
pub fn fit_lambda(values: &[f64], method: PowerMethod) -> Result<f64> {
    if values.len() < 2 {
        return Err(OmicsError::Argument(
            "power transform fitting needs at least two values".into(),
        ));
    }
    if method == PowerMethod::BoxCox {
        if let Some(v) = values.iter().find(|&&v| v <= 0.0) {
            return Err(OmicsError::Domain(format!(
                "box_cox requires positive values, found {v}"
            )));
        }
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(1.0);
    }
    let llf = |lam: f64| profile_log_likelihood(values, lam, method);
    let (lo, hi) = LAMBDA_RANGE;
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let scores: Vec<f64> = grid.iter().map(|&l| llf(l)).collect();
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |b, (i, s)| if *s > scores[b] { i } else { b });
    if !scores[best].is_finite() {
        return Err(OmicsError::Numerical(
            "power-transform likelihood is not finite anywhere on the grid".into(),
        ));
    }
    let unimodal = scores[..=best].windows(2).all(|w| w[0] <= w[1])
        && scores[best..].windows(2).all(|w| w[0] >= w[1]);
    let (a, b) = if unimodal {
        (lo, hi)
    } else {
        (grid[best.saturating_sub(1)], grid[(best + 1).min(GRID_POINTS - 1)])
    };
    let refined = golden_section_max(&llf, a, b, GOLDEN_TOL);
    Ok(if llf(refined) >= scores[best] {
        refined
    } else {
        grid[best]
    })
}

fn golden_section_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Fits one exponent per feature; features are processed in parallel.
pub fn fit_power_transform(x: &OmicsMatrix, method: PowerMethod) -> Result<PowerTransformParams> {
    x.require_complete("power transform fitting")?;
    let lambdas = (0..x.n_features())
        .into_par_iter()
        .map(|f| {
            fit_lambda(&x.values().col(f), method).map_err(|e| match e {
                OmicsError::Domain(msg) => {
                    OmicsError::Domain(format!("feature `{}`: {msg}", x.feature_ids()[f]))
                }
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerTransformParams { method, lambdas })
}

pub fn apply_power_transform(x: &OmicsMatrix, params: &PowerTransformParams) -> Result<OmicsMatrix> {
    x.require_complete("power transform")?;
    if params.lambdas.len() != x.n_features() {
        return Err(OmicsError::Argument(format!(
            "{} exponents for {} features",
            params.lambdas.len(),
            x.n_features()
        )));
    }
    let mut values = x.values().clone();
    for i in 0..x.n_samples() {
        for (f, (v, &lam)) in values.row_mut(i).iter_mut().zip(&params.lambdas).enumerate() {
            if params.method == PowerMethod::BoxCox && *v <= 0.0 {
                return Err(OmicsError::Domain(format!(
                    "box_cox of nonpositive value {v} in feature `{}`",
                    x.feature_ids()[f]
                )));
            }
            let t = transform(params.method, *v, lam);
            if !t.is_finite() {
                return Err(OmicsError::Numerical(format!(
                    "power transform overflow in feature `{}`",
                    x.feature_ids()[f]
                )));
            }
            *v = t;
        }
    }
    Ok(x.with_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn skewness(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let m2 = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        m3 / m2.powf(1.5)
    }

    #[test]
    fn spot_values() {
        assert_eq!(yeo_johnson(2.5, 1.0), 2.5);
        assert!((yeo_johnson(std::f64::consts::E - 1.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((yeo_johnson(-1.0, 2.0) + 2f64.ln()).abs() < 1e-15);
        // λ = 2 is the general branch for x >= 0, and λ = 0 for x < 0
        assert!((yeo_johnson(1.0, 2.0) - 1.5).abs() < 1e-15);
        assert!((yeo_johnson(-1.0, 0.0) - (-(4.0 - 1.0) / 2.0)).abs() < 1e-15);
        assert!((box_cox(std::f64::consts::E, 0.0) - 1.0).abs() < 1e-15);
        assert!((box_cox(3.0, 2.0) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn normal_sample_fits_lambda_near_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let v: Vec<f64> = (0..5000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let lam = fit_lambda(&v, PowerMethod::YeoJohnson).unwrap();
        assert!((lam - 1.0).abs() < 0.15, "λ = {lam}");
    }

    #[test]
    fn lognormal_sample_fits_box_cox_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let v: Vec<f64> = (0..5000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z.exp()
            })
            .collect();
        let lam = fit_lambda(&v, PowerMethod::BoxCox).unwrap();
        assert!(lam.abs() < 0.15, "λ = {lam}");
    }

    #[test]
    fn right_skew_is_reduced() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..2000)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (0.8 * z).exp() - 0.5
            })
            .collect();
        let lam = fit_lambda(&v, PowerMethod::YeoJohnson).unwrap();
        let t: Vec<f64> = v.iter().map(|&x| yeo_johnson(x, lam)).collect();
        assert!(skewness(&t).abs() <= skewness(&v).abs());
    }

    #[test]
    fn box_cox_domain_errors() {
        assert!(matches!(
            fit_lambda(&[1.0, 0.0, 2.0], PowerMethod::BoxCox),
            Err(OmicsError::Domain(_))
        ));
    }

    #[test]
    fn constant_feature_keeps_identity() {
        assert_eq!(fit_lambda(&[3.0, 3.0, 3.0], PowerMethod::YeoJohnson).unwrap(), 1.0);
    }

    proptest! {
        #[test]
        fn yeo_johnson_is_strictly_monotone(a in -20.0f64..20.0, b in -20.0f64..20.0, lam in -5.0f64..5.0) {
            prop_assume!((a - b).abs() > 1e-3);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(yeo_johnson(lo, lam) < yeo_johnson(hi, lam));
        }
    }
}
