use statrs::function::gamma::gamma_ur;

use crate::error::{OmicsError, Result};

/// Upper tail `P(χ²_df > x)` via the regularized incomplete gamma `Q(df/2, x/2)`.
pub fn chi_square_sf(x: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(OmicsError::Argument(
            "chi-square needs at least one degree of freedom".into(),
        ));
    }
    if x.is_nan() || x < 0.0 {
        return Err(OmicsError::Argument(format!(
            "chi-square statistic must be nonnegative, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}
