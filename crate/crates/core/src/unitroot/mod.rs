//! Panel unit-root pretests: per-series augmented Dickey–Fuller regressions,
//! the Im–Pesaran–Shin t-bar test and the Fisher combined-ADF test.
//!
//! Finite-sample p-values and t moments come from a Monte Carlo tabulation
//! shipped in `data/` (see [`tables`] and the `gen-unitroot-tables` binary).

pub mod tables;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{chi2_survival, normal_cdf};
use crate::estimators::{ols_solve, EstimationError};
use crate::panel::{PanelDataset, PanelError};

pub use tables::{shipped_tables, DfTables};

/// Default augmentation order for annual data.
pub const DEFAULT_LAGS: usize = 1;
/// Edge values returned when a statistic falls outside the tabulated range.
pub const P_FLOOR: f64 = 1e-6;
pub const P_CEIL: f64 = 1.0 - 1e-6;

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Deterministics {
    #[default]
    Constant,
    ConstantTrend,
}

impl Deterministics {
    pub fn tag(&self) -> &'static str {
        match self {
            Deterministics::Constant => "constant",
            Deterministics::ConstantTrend => "constant_trend",
        }
    }

    fn n_columns(&self) -> usize {
        match self {
            Deterministics::Constant => 1,
            Deterministics::ConstantTrend => 2,
        }
    }
}

impl fmt::Display for Deterministics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Deterministics {
    type Err = UnitRootError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" | "c" => Ok(Deterministics::Constant),
            "constant_trend" | "constant+trend" | "ct" => Ok(Deterministics::ConstantTrend),
            _ => Err(UnitRootError::UnknownDeterministics(s.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitRootError {
    #[error("series too short: {len} observations, need at least {needed} for {lags} lag(s)")]
    TooShort {
        len: usize,
        needed: usize,
        lags: usize,
    },
    #[error("degenerate series (perfect fit in the ADF regression)")]
    Degenerate,
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("need at least 2 usable series, have {usable}")]
    NotEnoughSeries { usable: usize },
    #[error("unknown deterministics {0:?}")]
    UnknownDeterministics(String),
    #[error("unit-root table: {0}")]
    Table(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    /// Series label (entity id for panel runs).
    pub label: String,
    pub t_stat: f64,
    pub lags_used: usize,
    pub n_effective: usize,
    pub deterministics: Deterministics,
    pub p_value: Option<f64>,
    /// p-value sits at a table edge.
    pub p_clamped: bool,
}

/// A series left out of a panel test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub label: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpsResult {
    pub variable: String,
    pub t_bar: f64,
    pub w_stat: f64,
    pub n_series: usize,
    pub p_value: f64,
    pub per_series: Vec<AdfResult>,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub variable: String,
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub per_series: Vec<AdfResult>,
    pub excluded: Vec<Exclusion>,
}

/// Smallest series length (in levels) usable with `lags` augmentation lags.
pub fn min_length(lags: usize, det: Deterministics) -> usize {
    // n_eff = len - 1 - lags must reach lags + 3, 4, and exceed the column count
    let k = 1 + det.n_columns() + lags;
    let n_eff = (lags + 3).max(4).max(k + 1);
    n_eff + lags + 1
}

/// Design of the ADF regression: Δy_t on y_{t−1}, deterministics and
/// Δy_{t−1..t−lags}. Returns (Δy, X) with y_{t−1} in column 0.
pub(crate) fn adf_design(
    series: &[f64],
    lags: usize,
    det: Deterministics,
) -> Result<(DVector<f64>, DMatrix<f64>), UnitRootError> {
    if series.iter().any(|v| !v.is_finite()) {
        return Err(UnitRootError::NonFinite);
    }
    let needed = min_length(lags, det);
    if series.len() < needed {
        return Err(UnitRootError::TooShort {
            len: series.len(),
            needed,
            lags,
        });
    }
    let dy: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
    let n = dy.len() - lags;
    let k = 1 + det.n_columns() + lags;
    let mut x = DMatrix::zeros(n, k);
    let mut y = DVector::zeros(n);
    for r in 0..n {
        let t = r + lags; // index into dy
        y[r] = dy[t];
        x[(r, 0)] = series[t];
        x[(r, 1)] = 1.0;
        let mut c = 2;
        if det == Deterministics::ConstantTrend {
            x[(r, 2)] = (r + 1) as f64;
            c = 3;
        }
        for j in 1..=lags {
            x[(r, c + j - 1)] = dy[t - j];
        }
    }
    Ok((y, x))
}

/// Augmented Dickey–Fuller regression; the result carries no p-value.
pub fn adf_regression(
    series: &[f64],
    lags: usize,
    det: Deterministics,
) -> Result<AdfResult, UnitRootError> {
    let (y, x) = adf_design(series, lags, det)?;
    let scale = y.norm_squared();
    let sol = match ols_solve(&x, &y) {
        Ok(s) => s,
        Err(EstimationError::RankDeficient { .. }) => return Err(UnitRootError::Degenerate),
        Err(EstimationError::TooFewObservations { n, .. }) => {
            return Err(UnitRootError::TooShort {
                len: series.len(),
                needed: n + 1,
                lags,
            })
        }
        Err(_) => return Err(UnitRootError::NonFinite),
    };
    if sol.ssr <= 1e-20 * scale || scale == 0.0 {
        return Err(UnitRootError::Degenerate);
    }
    let se = sol.covariance[(0, 0)].sqrt();
    Ok(AdfResult {
        label: String::new(),
        t_stat: sol.coefficients[0] / se,
        lags_used: lags,
        n_effective: y.len(),
        deterministics: det,
        p_value: None,
        p_clamped: false,
    })
}

/// Dickey–Fuller p-value from the shipped tabulation (no augmentation lags).
/// Returns (p, clamped).
pub fn adf_p_value(t_stat: f64, det: Deterministics, n_effective: usize) -> (f64, bool) {
    adf_p_value_lags(t_stat, det, 0, n_effective)
}

/// As [`adf_p_value`] for a regression with `lags` augmentation lags.
pub fn adf_p_value_lags(
    t_stat: f64,
    det: Deterministics,
    lags: usize,
    n_effective: usize,
) -> (f64, bool) {
    shipped_tables().p_value(t_stat, det, lags, n_effective + lags + 1)
}

/// ADF regression plus its tabulated p-value.
pub fn adf_test(
    series: &[f64],
    lags: usize,
    det: Deterministics,
) -> Result<AdfResult, UnitRootError> {
    let mut r = adf_regression(series, lags, det)?;
    let (p, clamped) = adf_p_value_lags(r.t_stat, det, lags, r.n_effective);
    r.p_value = Some(p);
    r.p_clamped = clamped;
    Ok(r)
}

/// Labeled series extracted from a panel variable, plus entities that could
/// not be used (interior gaps).
pub fn panel_series(
    ds: &PanelDataset,
    variable: &str,
) -> Result<(Vec<(String, Vec<f64>)>, Vec<Exclusion>), UnitRootError> {
    let grid = ds.variable(variable)?;
    let n_t = ds.times().len();
    let mut out = Vec::new();
    let mut excluded = Vec::new();
    for (e, entity) in ds.entities().iter().enumerate() {
        let cells: Vec<Option<f64>> = (0..n_t).map(|t| grid.cell(ds.cell_index(e, t))).collect();
        let first = cells.iter().position(Option::is_some);
        let last = cells.iter().rposition(Option::is_some);
        let (Some(a), Some(b)) = (first, last) else {
            excluded.push(Exclusion {
                label: entity.to_string(),
                reason: "no observations".into(),
            });
            continue;
        };
        let span = &cells[a..=b];
        if span.iter().any(Option::is_none) {
            excluded.push(Exclusion {
                label: entity.to_string(),
                reason: "interior gap in series".into(),
            });
            continue;
        }
        out.push((
            entity.to_string(),
            span.iter().map(|v| v.unwrap()).collect(),
        ));
    }
    Ok((out, excluded))
}

fn per_series_tests(
    series: &[(String, Vec<f64>)],
    lags: usize,
    det: Deterministics,
    excluded: &mut Vec<Exclusion>,
) -> Vec<(AdfResult, usize)> {
    let mut results = Vec::new();
    for (label, values) in series {
        match adf_test(values, lags, det) {
            Ok(mut r) => {
                r.label = label.clone();
                results.push((r, values.len()));
            }
            Err(e) => excluded.push(Exclusion {
                label: label.clone(),
                reason: e.to_string(),
            }),
        }
    }
    results
}

/// IPS t-bar test on labeled series (possibly of unequal length).
pub fn ips_from_series(
    variable: &str,
    series: &[(String, Vec<f64>)],
    lags: usize,
    det: Deterministics,
) -> Result<IpsResult, UnitRootError> {
    let mut excluded = Vec::new();
    let results = per_series_tests(series, lags, det, &mut excluded);
    ips_combine(variable, results, excluded, det)
}

fn ips_combine(
    variable: &str,
    results: Vec<(AdfResult, usize)>,
    excluded: Vec<Exclusion>,
    det: Deterministics,
) -> Result<IpsResult, UnitRootError> {
    let n = results.len();
    if n < 2 {
        return Err(UnitRootError::NotEnoughSeries { usable: n });
    }
    let tables = shipped_tables();
    let (mut ts, mut es, mut vs) = (Vec::new(), Vec::new(), Vec::new());
    for (r, len) in &results {
        let (e, v) = tables.moments(det, r.lags_used, *len)?;
        ts.push(r.t_stat);
        es.push(e);
        vs.push(v);
    }
    let (sum_t, sum_e, sum_v) = (sorted_sum(ts), sorted_sum(es), sorted_sum(vs));
    let nf = n as f64;
    let t_bar = sum_t / nf;
    let w_stat = nf.sqrt() * (t_bar - sum_e / nf) / (sum_v / nf).sqrt();
    Ok(IpsResult {
        variable: variable.to_string(),
        t_bar,
        w_stat,
        n_series: n,
        p_value: normal_cdf(w_stat).clamp(0.0, 1.0),
        per_series: results.into_iter().map(|(r, _)| r).collect(),
        excluded,
    })
}

/// Sum in ascending order, so the result does not depend on input order.
fn sorted_sum(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// Grid of the Fisher terms. Sums of grid multiples below 2^21 are exact in
/// f64, which makes the statistic additive over disjoint entity sets.
const FISHER_GRID: f64 = 4_294_967_296.0; // 2^32

/// Fisher combination −2 Σ ln p_i with its χ²(2N) tail: (statistic, df, p).
///
/// Each term is rounded to a multiple of 2^-32 before summation.
pub fn fisher_combine(p_values: &[f64]) -> (f64, u32, f64) {
    let statistic: f64 = p_values
        .iter()
        .map(|p| (-2.0 * p.ln() * FISHER_GRID).round() / FISHER_GRID)
        .sum();
    let statistic = statistic.max(0.0);
    let df = 2 * p_values.len() as u32;
    let p = if df == 0 {
        1.0
    } else {
        chi2_survival(statistic, df).unwrap_or(1.0)
    };
    (statistic, df, p)
}

/// Fisher-type combined ADF test on labeled series.
pub fn fisher_from_series(
    variable: &str,
    series: &[(String, Vec<f64>)],
    lags: usize,
    det: Deterministics,
) -> Result<FisherResult, UnitRootError> {
    let mut excluded = Vec::new();
    let results = per_series_tests(series, lags, det, &mut excluded);
    fisher_combine_results(
        variable,
        results.into_iter().map(|(r, _)| r).collect(),
        excluded,
    )
}

fn fisher_combine_results(
    variable: &str,
    per_series: Vec<AdfResult>,
    excluded: Vec<Exclusion>,
) -> Result<FisherResult, UnitRootError> {
    if per_series.len() < 2 {
        return Err(UnitRootError::NotEnoughSeries {
            usable: per_series.len(),
        });
    }
    let ps: Vec<f64> = per_series
        .iter()
        .map(|r| r.p_value.unwrap_or(1.0))
        .collect();
    let (statistic, df, p_value) = fisher_combine(&ps);
    Ok(FisherResult {
        variable: variable.to_string(),
        statistic,
        df,
        p_value,
        per_series,
        excluded,
    })
}

/// IPS test on every entity's series of `variable`.
pub fn ips_test(
    ds: &PanelDataset,
    variable: &str,
    lags: usize,
    det: Deterministics,
) -> Result<IpsResult, UnitRootError> {
    let (series, mut excluded) = panel_series(ds, variable)?;
    let results = per_series_tests(&series, lags, det, &mut excluded);
    ips_combine(variable, results, excluded, det)
}

/// Fisher-ADF test on every entity's series of `variable`.
pub fn fisher_adf_test(
    ds: &PanelDataset,
    variable: &str,
    lags: usize,
    det: Deterministics,
) -> Result<FisherResult, UnitRootError> {
    let (series, mut excluded) = panel_series(ds, variable)?;
    let results = per_series_tests(&series, lags, det, &mut excluded);
    fisher_combine_results(
        variable,
        results.into_iter().map(|(r, _)| r).collect(),
        excluded,
    )
}

/// Both panel tests from one set of per-series regressions.
pub fn panel_unit_root(
    ds: &PanelDataset,
    variable: &str,
    lags: usize,
    det: Deterministics,
) -> Result<(IpsResult, FisherResult), UnitRootError> {
    let (series, mut excluded) = panel_series(ds, variable)?;
    let results = per_series_tests(&series, lags, det, &mut excluded);
    let fisher = fisher_combine_results(
        variable,
        results.iter().map(|(r, _)| r.clone()).collect(),
        excluded.clone(),
    )?;
    let ips = ips_combine(variable, results, excluded, det)?;
    Ok((ips, fisher))
}
