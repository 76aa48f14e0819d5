//! Estimator chain for log-linear gravity panels.
//!
//! All estimators share the orthogonal least-squares kernel in [`ols`]:
//! pooled OLS, the within (fixed-effects) estimator, feasible random-effects
//! GLS with Swamy–Arora variance components, and two-step
//! heteroskedasticity-robust IV-GMM.

mod fe;
mod gmm;
pub mod ols;
mod re;

pub use fe::fixed_effects;
pub use gmm::{iv_gmm, GmmSpec, Weighting};
pub use ols::{ols_solve, OlsSolution};
pub use re::{random_effects, random_effects_with, variance_components, VarianceComponents};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{ColumnMeta, PanelError, RegressionProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PooledOls,
    FixedEffects,
    RandomEffects,
    IvGmm,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::PooledOls => "pooled_ols",
            Method::FixedEffects => "fixed_effects",
            Method::RandomEffects => "random_effects",
            Method::IvGmm => "iv_gmm",
        }
    }

    /// Column heading used in rendered tables.
    pub fn heading(&self) -> &'static str {
        match self {
            Method::PooledOls => "Pooled OLS",
            Method::FixedEffects => "Fixed effects",
            Method::RandomEffects => "Random effects",
            Method::IvGmm => "GMM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("rank-deficient design; dependent column(s): {}", .columns.join(", "))]
    RankDeficient { columns: Vec<String> },
    #[error("rank-deficient instrument matrix; dependent column(s): {}", .columns.join(", "))]
    RankDeficientInstruments { columns: Vec<String> },
    #[error("need more observations ({n}) than parameters ({k})")]
    TooFewObservations { n: usize, k: usize },
    #[error("no residual degrees of freedom (n={n}, k={k}, entities={entities})")]
    NoDegreesOfFreedom { n: usize, k: usize, entities: usize },
    #[error("random effects need at least two entities")]
    TooFewEntities,
    #[error("between regression infeasible: {entities} entities for {k} columns")]
    BetweenInfeasible { entities: usize, k: usize },
    #[error("order condition violated: {instruments} instruments for {regressors} regressors")]
    OrderCondition {
        instruments: usize,
        regressors: usize,
    },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {0:?} cannot instrument itself")]
    SelfInstrument(String),
    #[error("singular moment covariance in the second GMM step")]
    SingularMoments,
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
}

impl EstimationError {
    /// Replaces positional column labels with names.
    pub(crate) fn named(self, names: &[String]) -> Self {
        let rename = |cols: Vec<String>| {
            cols.into_iter()
                .map(|c| {
                    c.strip_prefix('#')
                        .and_then(|i| i.parse::<usize>().ok())
                        .and_then(|i| names.get(i).cloned())
                        .unwrap_or(c)
                })
                .collect()
        };
        match self {
            EstimationError::RankDeficient { columns } => EstimationError::RankDeficient {
                columns: rename(columns),
            },
            EstimationError::RankDeficientInstruments { columns } => {
                EstimationError::RankDeficientInstruments {
                    columns: rename(columns),
                }
            }
            other => other,
        }
    }
}

/// Fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub columns: Vec<ColumnMeta>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub residuals: DVector<f64>,
    pub n_obs: usize,
    pub df_resid: usize,
    pub r_squared: f64,
    /// Method-specific scalars: variance components, Hansen J, first-stage F.
    pub extras: BTreeMap<String, f64>,
    pub flags: BTreeSet<String>,
    /// Columns of the problem that the method could not identify.
    pub dropped_columns: Vec<String>,
}

impl EstimationResult {
    pub(crate) fn new(
        method: Method,
        columns: Vec<ColumnMeta>,
        coefficients: &DVector<f64>,
        covariance: DMatrix<f64>,
        residuals: DVector<f64>,
        df_resid: usize,
        r_squared: f64,
    ) -> Self {
        let covariance = symmetrize(&covariance);
        let std_errors = covariance
            .diagonal()
            .iter()
            .map(|v| v.max(0.0).sqrt())
            .collect();
        EstimationResult {
            method,
            columns,
            coefficients: coefficients.iter().copied().collect(),
            std_errors,
            covariance,
            n_obs: residuals.len(),
            residuals,
            df_resid,
            r_squared: r_squared.clamp(0.0, 1.0),
            extras: BTreeMap::new(),
            flags: BTreeSet::new(),
            dropped_columns: Vec::new(),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(|c| c.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.coefficients[i])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|i| self.std_errors[i])
    }

    /// Two-sided normal p-value of `coef / se`.
    pub fn p_value(&self, name: &str) -> Option<f64> {
        let i = self.index_of(name)?;
        Some(crate::diagnostics::normal_two_sided_p(
            self.coefficients[i] / self.std_errors[i],
        ))
    }

    pub fn intercept(&self) -> Option<usize> {
        self.columns.iter().position(|c| c.intercept)
    }
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Squared correlation between two vectors; 0 when either is constant.
pub(crate) fn squared_correlation(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let ma = a.sum() / n;
    let mb = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa <= 0.0 || sbb <= 0.0 {
        0.0
    } else {
        sab * sab / (saa * sbb)
    }
}

/// Pooled OLS on the problem as given. R² = 1 − SSR/SST.
pub fn pooled_ols(p: &RegressionProblem) -> Result<EstimationResult, EstimationError> {
    let names = p.column_names();
    let sol = ols_solve(p.x(), p.y()).map_err(|e| e.named(&names))?;
    let y = p.y();
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if sst > 0.0 { 1.0 - sol.ssr / sst } else { 0.0 };
    let mut res = EstimationResult::new(
        Method::PooledOls,
        p.columns().to_vec(),
        &sol.coefficients,
        sol.covariance,
        sol.residuals,
        sol.df_resid,
        r2,
    );
    res.extras.insert("sigma2".into(), sol.sigma2);
    Ok(res)
}
