//! Specification tests and distribution tails.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;
use thiserror::Error;

use crate::estimators::ols::qr_least_squares;
use crate::estimators::EstimationResult;

/// Eigenvalues below this fraction of the largest magnitude count as zero.
pub const PINV_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("chi-squared statistic must be non-negative, got {0}")]
    NegativeStatistic(f64),
    #[error("chi-squared degrees of freedom must be at least 1")]
    ZeroDf,
    #[error("no common time-varying coefficients to compare")]
    NoCommonColumns,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular X'X; dependent column(s): {}", .0.join(", "))]
    Singular(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFlag {
    NotPositiveDefinite,
    ClampedNegative,
}

impl fmt::Display for TestFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestFlag::NotPositiveDefinite => "not_positive_definite",
            TestFlag::ClampedNegative => "clamped_negative",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub name: String,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub flags: BTreeSet<TestFlag>,
}

/// Upper tail of the χ² distribution, Q(df/2, x/2).
pub fn chi2_survival(x: f64, df: u32) -> Result<f64, DiagnosticsError> {
    if df == 0 {
        return Err(DiagnosticsError::ZeroDf);
    }
    if !(x >= 0.0) {
        return Err(DiagnosticsError::NegativeStatistic(x));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(gamma_ur(df as f64 / 2.0, x / 2.0).clamp(0.0, 1.0))
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// P(|Z| > |z|).
pub fn normal_two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Heteroskedasticity-robust sandwich (X'X)⁻¹ X' diag(e²) X (X'X)⁻¹,
/// optionally scaled by n/(n − k).
pub fn robust_covariance(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    small_sample: bool,
) -> Result<DMatrix<f64>, DiagnosticsError> {
    let (n, k) = x.shape();
    if residuals.len() != n {
        return Err(DiagnosticsError::Dimension(format!(
            "X has {n} rows, residuals have {}",
            residuals.len()
        )));
    }
    let (_, r_inv) = qr_least_squares(x, &DVector::zeros(n)).map_err(DiagnosticsError::Singular)?;
    let bread = &r_inv * r_inv.transpose();
    let mut xe = x.clone();
    for (i, mut row) in xe.row_iter_mut().enumerate() {
        row *= residuals[i];
    }
    let meat = xe.transpose() * &xe;
    let mut v = &bread * meat * &bread;
    if small_sample && n > k {
        v *= n as f64 / (n - k) as f64;
    }
    Ok((&v + v.transpose()) * 0.5)
}

/// Full Hausman comparison: the coefficient block plus the test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HausmanComparison {
    pub names: Vec<String>,
    /// Consistent estimator (fixed effects).
    pub consistent: Vec<f64>,
    /// Efficient estimator (random effects).
    pub efficient: Vec<f64>,
    pub difference: Vec<f64>,
    /// sqrt of the diagonal of V_b − V_B; `None` where that entry is negative.
    pub se_difference: Vec<Option<f64>>,
    pub test: TestResult,
}

impl HausmanComparison {
    /// Comparison block from reported coefficient vectors; the difference
    /// column is b − B.
    pub fn from_coefficients(
        names: Vec<String>,
        consistent: Vec<f64>,
        efficient: Vec<f64>,
        se_difference: Vec<Option<f64>>,
        test: TestResult,
    ) -> Result<Self, DiagnosticsError> {
        let m = names.len();
        if consistent.len() != m || efficient.len() != m || se_difference.len() != m {
            return Err(DiagnosticsError::Dimension(format!(
                "{m} names, {} consistent, {} efficient, {} standard errors",
                consistent.len(),
                efficient.len(),
                se_difference.len()
            )));
        }
        if m == 0 {
            return Err(DiagnosticsError::NoCommonColumns);
        }
        let difference = consistent
            .iter()
            .zip(&efficient)
            .map(|(b, bb)| b - bb)
            .collect();
        Ok(HausmanComparison {
            names,
            consistent,
            efficient,
            difference,
            se_difference,
            test,
        })
    }
}

/// Hausman test of fixed effects (consistent) against random effects
/// (efficient) on their common time-varying coefficients.
///
/// The quadratic form uses a symmetric pseudo-inverse of V_FE − V_RE; df is
/// the rank of that matrix. Negative eigenvalues set
/// [`TestFlag::NotPositiveDefinite`]; a negative statistic is reported as 0
/// with [`TestFlag::ClampedNegative`].
pub fn hausman_comparison(
    fe: &EstimationResult,
    re: &EstimationResult,
) -> Result<HausmanComparison, DiagnosticsError> {
    let is_comparable = |r: &EstimationResult, name: &str| {
        r.index_of(name)
            .map(|i| !r.columns[i].intercept && !r.columns[i].time_invariant)
            .unwrap_or(false)
    };
    let names: Vec<String> = fe
        .names()
        .filter(|n| is_comparable(fe, n) && is_comparable(re, n))
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        return Err(DiagnosticsError::NoCommonColumns);
    }
    let fi: Vec<usize> = names.iter().map(|n| fe.index_of(n).unwrap()).collect();
    let ri: Vec<usize> = names.iter().map(|n| re.index_of(n).unwrap()).collect();
    let m = names.len();
    let b = DVector::from_iterator(m, fi.iter().map(|&i| fe.coefficients[i]));
    let bb = DVector::from_iterator(m, ri.iter().map(|&i| re.coefficients[i]));
    let vb = DMatrix::from_fn(m, m, |r, c| fe.covariance[(fi[r], fi[c])]);
    let vbb = DMatrix::from_fn(m, m, |r, c| re.covariance[(ri[r], ri[c])]);
    let diff = &b - &bb;
    let d = &vb - &vbb;
    let se_difference = (0..m)
        .map(|i| {
            let v = d[(i, i)];
            (v >= 0.0).then(|| v.sqrt())
        })
        .collect();
    let test = hausman_statistic(&diff, &d);
    Ok(HausmanComparison {
        names,
        consistent: b.iter().copied().collect(),
        efficient: bb.iter().copied().collect(),
        difference: diff.iter().copied().collect(),
        se_difference,
        test,
    })
}

pub fn hausman_test(
    fe: &EstimationResult,
    re: &EstimationResult,
) -> Result<TestResult, DiagnosticsError> {
    hausman_comparison(fe, re).map(|c| c.test)
}

/// Δ' D⁺ Δ with a tolerance-based symmetric pseudo-inverse.
pub fn hausman_statistic(diff: &DVector<f64>, d: &DMatrix<f64>) -> TestResult {
    let m = diff.len();
    let sym = (d + d.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let max_abs = eig.eigenvalues.amax();
    let tol = PINV_TOLERANCE * max_abs;
    let mut flags = BTreeSet::new();
    let mut rank = 0u32;
    let mut stat = 0.0;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= tol || max_abs == 0.0 {
            continue;
        }
        if lambda < 0.0 {
            flags.insert(TestFlag::NotPositiveDefinite);
        }
        rank += 1;
        let proj = eig.eigenvectors.column(j).dot(diff);
        stat += proj * proj / lambda;
    }
    if stat < 0.0 {
        flags.insert(TestFlag::ClampedNegative);
        stat = 0.0;
    }
    let df = if rank == 0 { m.max(1) as u32 } else { rank };
    let p_value = chi2_survival(stat, df).unwrap_or(1.0);
    TestResult {
        name: "hausman".into(),
        statistic: stat,
        df,
        p_value,
        flags,
    }
}
