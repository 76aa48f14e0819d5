use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::dependent_columns;
use super::{
    ols_solve, squared_correlation, EstimationError, EstimationResult, Method, OlsSolution,
};
use crate::panel::{demean_within, quasi_demean, EntityId, PanelError, RegressionProblem};

/// Feasible variance components and the implied quasi-demeaning weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    pub sigma2_idiosyncratic: f64,
    pub sigma2_entity: f64,
    /// λ_i = 1 − sqrt(σ²_ε / (T_i σ²_u + σ²_ε))
    pub lambda_per_entity: BTreeMap<EntityId, f64>,
    /// Harmonic mean of the entity group sizes.
    pub t_bar: f64,
    /// σ̂²_u came out negative and was set to zero.
    pub clamped: bool,
}

impl VarianceComponents {
    /// Components with explicit σ² values, λ_i derived from group sizes.
    pub fn from_sigmas(p: &RegressionProblem, sigma2_idio: f64, sigma2_entity: f64) -> Self {
        let groups = p.entity_groups();
        let lambda_per_entity = groups
            .iter()
            .map(|(e, rows)| (*e, theta(rows.len(), sigma2_idio, sigma2_entity)))
            .collect();
        let inv_sum: f64 = groups.iter().map(|(_, r)| 1.0 / r.len() as f64).sum();
        VarianceComponents {
            sigma2_idiosyncratic: sigma2_idio,
            sigma2_entity,
            lambda_per_entity,
            t_bar: groups.len() as f64 / inv_sum,
            clamped: false,
        }
    }
}

fn theta(t_i: usize, s2e: f64, s2u: f64) -> f64 {
    if s2u <= 0.0 {
        return 0.0;
    }
    let denom = t_i as f64 * s2u + s2e;
    (1.0 - (s2e / denom).sqrt()).clamp(0.0, 1.0)
}

/// Between regression on entity means. Columns without between variation
/// (regressors that move only with the year in a balanced panel) are spanned
/// by the intercept there and are left out of this fit.
fn between_fit(xb: &DMatrix<f64>, yb: &DVector<f64>) -> Result<OlsSolution, EstimationError> {
    match ols_solve(xb, yb) {
        Err(EstimationError::RankDeficient { .. }) => {
            let dependent = dependent_columns(xb);
            let keep: Vec<usize> = (0..xb.ncols()).filter(|j| !dependent.contains(j)).collect();
            ols_solve(&xb.select_columns(&keep), yb)
        }
        other => other,
    }
}

/// Swamy–Arora components for unbalanced panels.
///
/// σ̂²_ε comes from the within regression (df = n − N − k_within); σ̂²_u is
/// the between-regression residual variance minus σ̂²_ε / T̄ with T̄ the
/// harmonic mean group size, clamped at zero.
pub fn variance_components(p: &RegressionProblem) -> Result<VarianceComponents, EstimationError> {
    let groups = p.entity_groups();
    let n_ent = groups.len();
    if n_ent < 2 {
        return Err(EstimationError::TooFewEntities);
    }
    let n = p.n_obs();
    let k = p.n_cols();
    if n_ent <= k {
        return Err(EstimationError::BetweenInfeasible { entities: n_ent, k });
    }

    let (ssr_w, k_w) = match demean_within(p) {
        Ok((w, _)) => {
            let names = w.column_names();
            let sol = ols_solve(w.x(), w.y()).map_err(|e| e.named(&names))?;
            (sol.ssr, w.n_cols())
        }
        Err(PanelError::NoWithinVariation) => {
            let ones = groups.iter().map(|(e, _)| (*e, 1.0)).collect();
            let w = quasi_demean(p, &ones)?;
            (w.y().norm_squared(), 0)
        }
        Err(e) => return Err(e.into()),
    };
    if n <= n_ent + k_w {
        return Err(EstimationError::NoDegreesOfFreedom {
            n,
            k: k_w,
            entities: n_ent,
        });
    }
    let sigma2_e = ssr_w / (n - n_ent - k_w) as f64;

    let mut xb = DMatrix::zeros(n_ent, k);
    let mut yb = DVector::zeros(n_ent);
    for (g, (_, rows)) in groups.iter().enumerate() {
        let t = rows.len() as f64;
        yb[g] = rows.iter().map(|&i| p.y()[i]).sum::<f64>() / t;
        for j in 0..k {
            xb[(g, j)] = rows.iter().map(|&i| p.x()[(i, j)]).sum::<f64>() / t;
        }
    }
    let names = p.column_names();
    let between = between_fit(&xb, &yb).map_err(|e| e.named(&names))?;

    let inv_sum: f64 = groups.iter().map(|(_, r)| 1.0 / r.len() as f64).sum();
    let t_bar = n_ent as f64 / inv_sum;
    let raw = between.sigma2 - sigma2_e / t_bar;
    let clamped = raw < 0.0;
    let sigma2_u = raw.max(0.0);

    let lambda_per_entity = groups
        .iter()
        .map(|(e, rows)| (*e, theta(rows.len(), sigma2_e, sigma2_u)))
        .collect();
    Ok(VarianceComponents {
        sigma2_idiosyncratic: sigma2_e,
        sigma2_entity: sigma2_u,
        lambda_per_entity,
        t_bar,
        clamped,
    })
}

/// Random-effects GLS with Swamy–Arora components.
pub fn random_effects(p: &RegressionProblem) -> Result<EstimationResult, EstimationError> {
    let vc = variance_components(p)?;
    random_effects_with(p, &vc)
}

/// Random-effects GLS with supplied components.
///
/// With every λ_i = 0 this is pooled OLS, bit for bit.
pub fn random_effects_with(
    p: &RegressionProblem,
    vc: &VarianceComponents,
) -> Result<EstimationResult, EstimationError> {
    let q = quasi_demean(p, &vc.lambda_per_entity)?;
    let names = q.column_names();
    let sol = ols_solve(q.x(), q.y()).map_err(|e| e.named(&names))?;
    let fitted = p.x() * &sol.coefficients;
    let residuals = p.y() - &fitted;
    let r2 = squared_correlation(p.y(), &fitted);

    let mut res = EstimationResult::new(
        Method::RandomEffects,
        p.columns().to_vec(),
        &sol.coefficients,
        sol.covariance,
        residuals,
        sol.df_resid,
        r2,
    );
    res.extras
        .insert("sigma2_idiosyncratic".into(), vc.sigma2_idiosyncratic);
    res.extras.insert("sigma2_entity".into(), vc.sigma2_entity);
    res.extras.insert("t_bar".into(), vc.t_bar);
    let lambdas: Vec<f64> = vc.lambda_per_entity.values().copied().collect();
    if !lambdas.is_empty() {
        res.extras.insert(
            "lambda_mean".into(),
            lambdas.iter().sum::<f64>() / lambdas.len() as f64,
        );
    }
    if vc.clamped {
        res.flags.insert("clamped_negative_sigma2_entity".into());
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::pooled_ols;
    use crate::panel::{ColumnMeta, RowKey};

    fn problem() -> RegressionProblem {
        let mut keys = Vec::new();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (e, code) in ["AAA", "BBB", "CCC", "DDD"].iter().enumerate() {
            let entity = EntityId::parse("PER", code).unwrap();
            for t in 0..5 {
                keys.push(RowKey {
                    entity,
                    year: 2000 + t,
                });
                let x = (e * 3 + t as usize * 7 % 5) as f64 * 0.5;
                xs.extend_from_slice(&[1.0, x]);
                ys.push(1.0 + 0.7 * x + [0.3, -0.2, 0.1, -0.4, 0.25][(e + t as usize) % 5]);
            }
        }
        RegressionProblem::from_parts(
            "y",
            DVector::from_vec(ys),
            DMatrix::from_row_slice(keys.len(), 2, &xs),
            keys,
            vec![ColumnMeta::intercept(), ColumnMeta::continuous("x")],
        )
        .unwrap()
    }

    #[test]
    fn zero_entity_variance_is_pooled() {
        let p = problem();
        let vc = VarianceComponents::from_sigmas(&p, 1.0, 0.0);
        assert!(vc.lambda_per_entity.values().all(|&l| l == 0.0));
        let re = random_effects_with(&p, &vc).unwrap();
        let ols = pooled_ols(&p).unwrap();
        assert_eq!(re.coefficients, ols.coefficients);
        assert_eq!(re.std_errors, ols.std_errors);
    }

    #[test]
    fn lambda_formula() {
        assert_eq!(theta(10, 1.0, 0.0), 0.0);
        let l = theta(4, 1.0, 2.0);
        assert!((l - (1.0 - (1.0f64 / 9.0).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn between_needs_more_entities_than_columns() {
        let p = problem();
        let x = DMatrix::from_fn(p.n_obs(), 5, |r, c| ((r * (c + 1)) % 7) as f64 + c as f64);
        let cols = (0..5)
            .map(|j| ColumnMeta::continuous(&format!("c{j}")))
            .collect();
        let wide =
            RegressionProblem::from_parts("y", p.y().clone(), x, p.row_keys().to_vec(), cols)
                .unwrap();
        let got = variance_components(&wide);
        assert!(
            matches!(
                got,
                Err(EstimationError::BetweenInfeasible { entities: 4, k: 5 })
            ),
            "{got:?}"
        );
    }

    #[test]
    fn year_only_regressor_is_left_out_of_the_between_fit() {
        let p = problem();
        let mut x = DMatrix::zeros(p.n_obs(), 3);
        for r in 0..p.n_obs() {
            let year = p.row_keys()[r].year;
            x[(r, 0)] = 1.0;
            x[(r, 1)] = p.x()[(r, 1)];
            x[(r, 2)] = ((year - 2000) as f64).powi(2) * 0.1;
        }
        let mut cols = p.columns().to_vec();
        cols.push(ColumnMeta::continuous("year_effect"));
        let q = RegressionProblem::from_parts("y", p.y().clone(), x, p.row_keys().to_vec(), cols)
            .unwrap();
        let vc = variance_components(&q).unwrap();
        assert!(vc.sigma2_idiosyncratic > 0.0);
        random_effects(&q).unwrap();
    }
}
