//! Monte Carlo tabulation of the Dickey–Fuller t distribution.
//!
//! For each deterministic case, augmentation order and series length the
//! simulation draws Gaussian random walks, runs the ADF regression and
//! records the mean, variance and a grid of quantiles of the t statistic.
//! The quantiles give finite-sample p-values; the moments standardize the
//! IPS t-bar statistic. Both are interpolated linearly in 1/T between
//! tabulated lengths.

use std::io::{self, Write};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{adf_regression, min_length, Deterministics, UnitRootError, P_CEIL, P_FLOOR};

pub const SEED: u64 = 20_061_015;
pub const REPLICATIONS: usize = 100_000;
/// Series lengths in levels.
pub const LENGTHS: [usize; 10] = [6, 8, 10, 15, 20, 25, 50, 100, 250, 500];
pub const MAX_LAGS: usize = 4;
pub const DETERMINISTICS: [Deterministics; 2] =
    [Deterministics::Constant, Deterministics::ConstantTrend];

pub const PVALUE_CSV: &str = include_str!("../../data/df_pvalue.csv");
pub const MOMENTS_CSV: &str = include_str!("../../data/ips_moments.csv");

/// Probabilities at which quantiles are stored.
pub fn probability_grid() -> Vec<f64> {
    let mut g = vec![1e-4, 2e-4, 5e-4, 1e-3, 2e-3, 5e-3];
    g.extend((1..100).map(|i| i as f64 / 100.0));
    g.extend([0.995, 0.998, 0.999, 0.9995, 0.9998, 0.9999]);
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub deterministics: Deterministics,
    pub lags: usize,
    pub length: usize,
    pub mean: f64,
    pub variance: f64,
    pub quantiles: Vec<f64>,
}

fn stream_id(det: Deterministics, lags: usize, length: usize) -> u64 {
    let d = DETERMINISTICS.iter().position(|&x| x == det).unwrap() as u64;
    (d << 32) | ((lags as u64) << 16) | length as u64
}

/// Simulates one cell; `None` when the length cannot support the regression.
pub fn simulate_cell(
    det: Deterministics,
    lags: usize,
    length: usize,
    reps: usize,
    seed: u64,
) -> Option<CellSummary> {
    if length < min_length(lags, det) {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(det, lags, length));
    let mut stats = Vec::with_capacity(reps);
    let mut walk = vec![0.0; length];
    while stats.len() < reps {
        let mut level = 0.0;
        for v in walk.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            level += e;
            *v = level;
        }
        if let Ok(r) = adf_regression(&walk, lags, det) {
            stats.push(r.t_stat);
        }
    }
    let n = stats.len() as f64;
    let mean = stats.iter().sum::<f64>() / n;
    let variance = stats.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
    stats.sort_by(f64::total_cmp);
    let quantiles = probability_grid()
        .iter()
        .map(|&p| empirical_quantile(&stats, p))
        .collect();
    Some(CellSummary {
        deterministics: det,
        lags,
        length,
        mean,
        variance,
        quantiles,
    })
}

/// Linear-interpolation quantile of sorted data (type 7).
fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Every feasible cell, in table order.
pub fn simulate_all(
    reps: usize,
    seed: u64,
    mut progress: impl FnMut(&CellSummary),
) -> Vec<CellSummary> {
    let mut out = Vec::new();
    for det in DETERMINISTICS {
        for lags in 0..=MAX_LAGS {
            for length in LENGTHS {
                if let Some(c) = simulate_cell(det, lags, length, reps, seed) {
                    progress(&c);
                    out.push(c);
                }
            }
        }
    }
    out
}

pub fn write_pvalue_csv(cells: &[CellSummary], mut w: impl Write) -> io::Result<()> {
    write!(w, "deterministics,lags,length")?;
    for p in probability_grid() {
        write!(w, ",{p}")?;
    }
    writeln!(w)?;
    for c in cells {
        write!(w, "{},{},{}", c.deterministics, c.lags, c.length)?;
        for q in &c.quantiles {
            write!(w, ",{q}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_moments_csv(cells: &[CellSummary], mut w: impl Write) -> io::Result<()> {
    writeln!(w, "deterministics,lags,length,mean,variance")?;
    for c in cells {
        writeln!(
            w,
            "{},{},{},{},{}",
            c.deterministics, c.lags, c.length, c.mean, c.variance
        )?;
    }
    Ok(())
}

/// Parsed tabulation.
#[derive(Debug, Clone, PartialEq)]
pub struct DfTables {
    grid: Vec<f64>,
    cells: Vec<CellSummary>,
}

fn table_err(msg: impl Into<String>) -> UnitRootError {
    UnitRootError::Table(msg.into())
}

impl DfTables {
    pub fn parse(pvalue_csv: &str, moments_csv: &str) -> Result<Self, UnitRootError> {
        let mut rdr = csv::Reader::from_reader(pvalue_csv.as_bytes());
        let header = rdr.headers().map_err(|e| table_err(e.to_string()))?.clone();
        let grid: Vec<f64> = header
            .iter()
            .skip(3)
            .map(|h| {
                h.parse::<f64>()
                    .map_err(|_| table_err(format!("bad probability {h:?}")))
            })
            .collect::<Result<_, _>>()?;
        let key =
            |rec: &csv::StringRecord| -> Result<(Deterministics, usize, usize), UnitRootError> {
                let det = rec.get(0).unwrap_or_default().parse()?;
                let lags = rec
                    .get(1)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| table_err("bad lags"))?;
                let len = rec
                    .get(2)
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| table_err("bad length"))?;
                Ok((det, lags, len))
            };
        let mut cells = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| table_err(e.to_string()))?;
            let (det, lags, length) = key(&rec)?;
            let quantiles: Vec<f64> = rec
                .iter()
                .skip(3)
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| table_err(format!("bad quantile {v:?}")))
                })
                .collect::<Result<_, _>>()?;
            if quantiles.len() != grid.len() {
                return Err(table_err("quantile row width mismatch"));
            }
            cells.push(CellSummary {
                deterministics: det,
                lags,
                length,
                mean: f64::NAN,
                variance: f64::NAN,
                quantiles,
            });
        }
        let mut rdr = csv::Reader::from_reader(moments_csv.as_bytes());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| table_err(e.to_string()))?;
            let k = key(&rec)?;
            let num = |i: usize| {
                rec.get(i)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| table_err("bad moment"))
            };
            let cell = cells
                .iter_mut()
                .find(|c| (c.deterministics, c.lags, c.length) == k)
                .ok_or_else(|| table_err(format!("moments for untabulated cell {k:?}")))?;
            cell.mean = num(3)?;
            cell.variance = num(4)?;
        }
        Ok(DfTables { grid, cells })
    }

    pub fn cells(&self) -> &[CellSummary] {
        &self.cells
    }

    /// The two tabulated cells bracketing `length` and the weight on the
    /// shorter one (interpolation in 1/T; clamped at the ends).
    fn bracket(
        &self,
        det: Deterministics,
        lags: usize,
        length: usize,
    ) -> Result<(&CellSummary, &CellSummary, f64), UnitRootError> {
        let row: Vec<&CellSummary> = self
            .cells
            .iter()
            .filter(|c| c.deterministics == det && c.lags == lags)
            .collect();
        if row.is_empty() {
            return Err(table_err(format!(
                "no tabulation for {det} with {lags} lag(s)"
            )));
        }
        let first = row[0];
        let last = row[row.len() - 1];
        if length <= first.length {
            return Ok((first, first, 1.0));
        }
        if length >= last.length {
            return Ok((last, last, 1.0));
        }
        let i = row.iter().position(|c| c.length >= length).unwrap();
        let (lo, hi) = (row[i - 1], row[i]);
        let inv = |l: usize| 1.0 / l as f64;
        let w = (inv(length) - inv(hi.length)) / (inv(lo.length) - inv(hi.length));
        Ok((lo, hi, w))
    }

    fn cell_p(&self, cell: &CellSummary, t: f64) -> (f64, bool) {
        let q = &cell.quantiles;
        if t.is_nan() {
            return (f64::NAN, false);
        }
        if t < q[0] {
            return (P_FLOOR, true);
        }
        if t > q[q.len() - 1] {
            return (P_CEIL, true);
        }
        // last index with q[i] <= t
        let i = q.partition_point(|&v| v <= t);
        if i >= q.len() {
            return (self.grid[q.len() - 1], false);
        }
        let (q0, q1) = (q[i - 1], q[i]);
        let (p0, p1) = (self.grid[i - 1], self.grid[i]);
        let p = if q1 > q0 {
            p0 + (t - q0) / (q1 - q0) * (p1 - p0)
        } else {
            p0
        };
        (p, false)
    }

    /// Left-tail p-value of an ADF t statistic for a series of `length`
    /// levels. Returns (p, clamped); untabulated lag orders clamp to the
    /// nearest tabulated one.
    pub fn p_value(&self, t: f64, det: Deterministics, lags: usize, length: usize) -> (f64, bool) {
        let lags = lags.min(MAX_LAGS);
        let Ok((lo, hi, w)) = self.bracket(det, lags, length) else {
            return (f64::NAN, false);
        };
        let (p_lo, c_lo) = self.cell_p(lo, t);
        let (p_hi, c_hi) = self.cell_p(hi, t);
        let p = w * p_lo + (1.0 - w) * p_hi;
        (p.clamp(P_FLOOR, P_CEIL), c_lo || c_hi)
    }

    /// (E[t], Var[t]) under the unit-root null.
    pub fn moments(
        &self,
        det: Deterministics,
        lags: usize,
        length: usize,
    ) -> Result<(f64, f64), UnitRootError> {
        let (lo, hi, w) = self.bracket(det, lags.min(MAX_LAGS), length)?;
        let mean = w * lo.mean + (1.0 - w) * hi.mean;
        let var = w * lo.variance + (1.0 - w) * hi.variance;
        if !mean.is_finite() || !(var > 0.0) {
            return Err(table_err(format!(
                "missing moments for {det}, {lags} lag(s)"
            )));
        }
        Ok((mean, var))
    }
}

/// Tables shipped in `data/`, parsed once.
pub fn shipped_tables() -> &'static DfTables {
    static TABLES: OnceLock<DfTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        DfTables::parse(PVALUE_CSV, MOMENTS_CSV).expect("shipped unit-root tables are well formed")
    })
}
