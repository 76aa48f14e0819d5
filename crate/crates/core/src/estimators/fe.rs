use super::{ols_solve, squared_correlation, EstimationError, EstimationResult, Method};
use crate::panel::{demean_within, RegressionProblem};

/// Within (fixed-effects) estimator.
///
/// Time-invariant columns cannot be identified and are left out of the
/// result (listed in `dropped_columns`). The residual degrees of freedom
/// account for the N absorbed entity means, and R² is the squared
/// correlation of y with the fit including recovered entity effects.
pub fn fixed_effects(p: &RegressionProblem) -> Result<EstimationResult, EstimationError> {
    let (within, dropped) = demean_within(p)?;
    let names = within.column_names();
    let sol = ols_solve(within.x(), within.y()).map_err(|e| e.named(&names))?;

    let n = within.n_obs();
    let k = within.n_cols();
    let entities = within.n_entities();
    if n <= k + entities {
        return Err(EstimationError::NoDegreesOfFreedom { n, k, entities });
    }
    let df = n - k - entities;
    let sigma2 = sol.ssr / df as f64;
    let covariance = &sol.xtx_inv * sigma2;

    // y_it - (x_it b + a_i) equals the within residual.
    let fitted = p.y() - &sol.residuals;
    let r2 = squared_correlation(p.y(), &fitted);

    let mut res = EstimationResult::new(
        Method::FixedEffects,
        within.columns().to_vec(),
        &sol.coefficients,
        covariance,
        sol.residuals,
        df,
        r2,
    );
    res.dropped_columns = dropped;
    res.extras.insert("sigma2_idiosyncratic".into(), sigma2);
    res.extras.insert("n_entities".into(), entities as f64);
    Ok(res)
}
