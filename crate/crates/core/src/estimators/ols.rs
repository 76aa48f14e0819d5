//! Least-squares kernel shared by every estimator.
//!
//! Solutions come from a Householder QR factorization of the design; the
//! normal equations are never formed.

use nalgebra::{DMatrix, DVector};

use super::EstimationError;

/// Smallest admissible ratio of extreme singular values.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsSolution {
    pub coefficients: DVector<f64>,
    /// Classical covariance σ̂² (X'X)⁻¹.
    pub covariance: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub ssr: f64,
    pub sigma2: f64,
    pub df_resid: usize,
    /// (X'X)⁻¹ = R⁻¹R⁻ᵀ.
    pub xtx_inv: DMatrix<f64>,
}

/// Least-squares fit of `y` on `x`. Requires more rows than columns and a
/// numerically full-rank design.
pub fn ols_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsSolution, EstimationError> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(EstimationError::Panel(crate::panel::PanelError::Dimension(
            format!("X has {n} rows, y has {}", y.len()),
        )));
    }
    if n <= k {
        return Err(EstimationError::TooFewObservations { n, k });
    }
    let (coefficients, r_inv) =
        qr_least_squares(x, y).map_err(|cols| EstimationError::RankDeficient { columns: cols })?;
    let residuals = y - x * &coefficients;
    let ssr = residuals.norm_squared();
    let df_resid = n - k;
    let sigma2 = ssr / df_resid as f64;
    let xtx_inv = &r_inv * r_inv.transpose();
    Ok(OlsSolution {
        coefficients,
        covariance: &xtx_inv * sigma2,
        residuals,
        ssr,
        sigma2,
        df_resid,
        xtx_inv,
    })
}

/// Solves min ‖a β − b‖ and returns (β, R⁻¹). Square systems are allowed.
/// On rank deficiency returns the positional labels (`#j`) of the columns
/// that are linear combinations of earlier ones.
pub(crate) fn qr_least_squares(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>), Vec<String>> {
    let (n, k) = a.shape();
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(vec!["non-finite input".to_string()]);
    }
    if k == 0 {
        return Ok((DVector::zeros(0), DMatrix::zeros(0, 0)));
    }
    if n < k {
        return Err((n..k).map(|j| format!("#{j}")).collect());
    }
    let qr = a.clone().qr();
    let r = qr.r();
    if !is_well_conditioned(&r) {
        return Err(dependent_columns(a)
            .into_iter()
            .map(|j| format!("#{j}"))
            .collect());
    }
    let mut qtb = b.clone();
    qr.q_tr_mul(&mut qtb);
    let rhs = qtb.rows(0, k).into_owned();
    let beta = r
        .solve_upper_triangular(&rhs)
        .expect("well-conditioned triangular factor");
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .expect("well-conditioned triangular factor");
    Ok((beta, r_inv))
}

/// Positions of columns that are (numerically) spanned by earlier columns.
pub(crate) fn dependent_columns(a: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<usize> = Vec::new();
    let mut dependent = Vec::new();
    for j in 0..a.ncols() {
        let mut trial = basis.clone();
        trial.push(j);
        let sub = a.select_columns(&trial);
        let r = sub.qr().r();
        if is_well_conditioned(&r) {
            basis.push(j);
        } else {
            dependent.push(j);
        }
    }
    dependent
}

fn is_well_conditioned(r: &DMatrix<f64>) -> bool {
    let sv = r.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min / max > RANK_TOLERANCE
}
