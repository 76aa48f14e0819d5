use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ols::{dependent_columns, qr_least_squares};
use super::{ols_solve, squared_correlation, EstimationError, EstimationResult, Method};
use crate::diagnostics::chi2_survival;
use crate::panel::RegressionProblem;

/// Excluded-instrument strength below which `weak_instruments` is flagged.
pub const WEAK_INSTRUMENT_F: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    TwoStepRobust,
    Homoskedastic,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GmmSpec {
    /// Design columns treated as endogenous.
    #[serde(default)]
    pub endogenous: Vec<String>,
    /// Excluded instruments, by name in the problem's instrument block.
    #[serde(default)]
    pub instruments: Vec<String>,
    #[serde(default)]
    pub weighting: Weighting,
}

/// Instrument matrix: exogenous design columns followed by the excluded
/// instruments named in `spec`.
fn instrument_matrix(
    p: &RegressionProblem,
    spec: &GmmSpec,
) -> Result<(DMatrix<f64>, Vec<String>, usize), EstimationError> {
    for name in &spec.endogenous {
        if p.column_index(name).is_none() {
            return Err(EstimationError::UnknownColumn(name.clone()));
        }
    }
    let is_endog = |name: &str| spec.endogenous.iter().any(|e| e == name);
    let mut cols: Vec<DVector<f64>> = Vec::new();
    let mut names = Vec::new();
    for (j, c) in p.columns().iter().enumerate() {
        if !is_endog(&c.name) {
            cols.push(p.x().column(j).into_owned());
            names.push(c.name.clone());
        }
    }
    let n_exog = cols.len();
    for inst in &spec.instruments {
        if names.contains(inst) {
            continue;
        }
        if let Some(j) = p.instrument_names().iter().position(|n| n == inst) {
            cols.push(p.instruments().column(j).into_owned());
            names.push(inst.clone());
        } else if is_endog(inst) {
            return Err(EstimationError::SelfInstrument(inst.clone()));
        } else {
            return Err(EstimationError::UnknownColumn(inst.clone()));
        }
    }
    let z = if cols.is_empty() {
        DMatrix::zeros(p.n_obs(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    Ok((z, names, n_exog))
}

/// Instrumental-variables GMM.
///
/// Step one is two-stage least squares. With [`Weighting::TwoStepRobust`]
/// step two re-weights the moments by the inverse of
/// S = n⁻¹ Σ e²ᵢ zᵢzᵢ' built from step-one residuals; the reported covariance
/// is n (X'Z S⁻¹ Z'X)⁻¹ scaled by n/(n − k). Overidentified fits carry the
/// Hansen J statistic in `extras` (exactly 0 when just identified).
pub fn iv_gmm(p: &RegressionProblem, spec: &GmmSpec) -> Result<EstimationResult, EstimationError> {
    let (n, k) = (p.n_obs(), p.n_cols());
    let x = p.x();
    let y = p.y();
    let (z, z_names, n_exog) = instrument_matrix(p, spec)?;
    let l = z.ncols();
    if l < k {
        return Err(EstimationError::OrderCondition {
            instruments: l,
            regressors: k,
        });
    }
    if n <= l {
        return Err(EstimationError::TooFewObservations { n, k: l });
    }
    let bad = dependent_columns(&z);
    if !bad.is_empty() {
        return Err(EstimationError::RankDeficientInstruments {
            columns: bad.into_iter().map(|j| z_names[j].clone()).collect(),
        });
    }
    let names = p.column_names();

    // Step 1: 2SLS through the projection onto col(Z).
    let q = z.clone().qr().q();
    let xhat = &q * (q.transpose() * x);
    let (beta1, r_inv1) = qr_least_squares(&xhat, y)
        .map_err(|cols| EstimationError::RankDeficient { columns: cols }.named(&names))?;
    let e1 = y - x * &beta1;

    let (beta, covariance, j_stat) = match spec.weighting {
        Weighting::Homoskedastic => {
            let ssr = e1.norm_squared();
            let sigma2 = ssr / (n - k) as f64;
            let cov = &r_inv1 * r_inv1.transpose() * sigma2;
            let j = if l > k && ssr > 0.0 {
                let pe = &q * (q.transpose() * &e1);
                n as f64 * pe.norm_squared() / ssr
            } else {
                0.0
            };
            (beta1, cov, j)
        }
        Weighting::TwoStepRobust => {
            let mut ze = z.clone();
            for (i, mut row) in ze.row_iter_mut().enumerate() {
                row *= e1[i];
            }
            let s = ze.transpose() * &ze / n as f64;
            let chol = s.cholesky().ok_or(EstimationError::SingularMoments)?;
            let lower = chol.l();
            let whiten = |m: DMatrix<f64>| {
                lower
                    .solve_lower_triangular(&m)
                    .expect("cholesky factor is invertible")
            };
            let a = whiten(z.transpose() * x);
            let b = whiten(z.transpose() * DMatrix::from_column_slice(n, 1, y.as_slice()));
            let b = b.column(0).into_owned();
            let (beta2, r_inv2) = qr_least_squares(&a, &b)
                .map_err(|cols| EstimationError::RankDeficient { columns: cols }.named(&names))?;
            let scale = n as f64 * n as f64 / (n - k) as f64;
            let cov = &r_inv2 * r_inv2.transpose() * scale;
            let e2 = y - x * &beta2;
            let j = if l > k {
                let g = whiten(z.transpose() * DMatrix::from_column_slice(n, 1, e2.as_slice()));
                g.norm_squared() / n as f64
            } else {
                0.0
            };
            (beta2, cov, j)
        }
    };

    let fitted = x * &beta;
    let residuals = y - &fitted;
    let r2 = squared_correlation(y, &fitted);
    let mut res = EstimationResult::new(
        Method::IvGmm,
        p.columns().to_vec(),
        &beta,
        covariance,
        residuals,
        n - k,
        r2,
    );

    let df = l - k;
    res.extras.insert("hansen_j".into(), j_stat);
    res.extras.insert("hansen_j_df".into(), df as f64);
    let j_p = if df > 0 {
        chi2_survival(j_stat, df as u32).unwrap_or(f64::NAN)
    } else {
        1.0
    };
    res.extras.insert("hansen_j_p".into(), j_p);
    res.extras.insert("n_instruments".into(), l as f64);

    // First-stage strength of the excluded instruments.
    let n_excluded = l - n_exog;
    if n_excluded > 0 {
        let z_exog = z.columns(0, n_exog).into_owned();
        for endog in &spec.endogenous {
            let j = p.column_index(endog).expect("validated");
            let xe = x.column(j).into_owned();
            let ssr_u = ols_solve(&z, &xe)?.ssr;
            let ssr_r = if n_exog == 0 {
                xe.norm_squared()
            } else {
                ols_solve(&z_exog, &xe)?.ssr
            };
            let f = ((ssr_r - ssr_u) / n_excluded as f64) / (ssr_u / (n - l) as f64);
            res.extras.insert(format!("first_stage_f:{endog}"), f);
            if !(f >= WEAK_INSTRUMENT_F) {
                res.flags.insert("weak_instruments".into());
            }
        }
    }
    Ok(res)
}
