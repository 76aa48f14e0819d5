//! Seeded synthetic panels with known coefficients.
//!
//! Every generated quantity draws from its own ChaCha8 stream, selected by
//! a stable hash of the quantity's name, so adding a variable never moves
//! the draws of another.
//!
//! Regressor families (all in logs):
//! - time-varying: x_it = a_i + e_it with a_i, e_it ~ N(0, 1)
//! - `unit_root`: x_it = x_i,t−1 + e_it, x_i0 ~ N(0, 1)
//! - `time_invariant`: x_i ~ N(0, 1)
//! - `dummies`: x_i ~ Bernoulli(1/2), constant over time
//!
//! The outcome is y_it = β'x_it + u_i + ε_it with u_i ~ N(0, σ²_entity)
//! correlated at `effect_correlation` with a_i of the first time-varying
//! regressor, and ε_it ~ N(0, σ²_idio).

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{
    build_panel, CountryCode, EntityId, Observation, PanelDataset, PanelError, Unit, Year,
    INTERCEPT,
};

/// Name of the generated outcome.
pub const OUTCOME: &str = "y";
/// Names of the generated excluded instruments.
pub const INSTRUMENTS: [&str; 2] = ["z1", "z2"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub n_entities: usize,
    pub n_periods: usize,
    pub start_year: Year,
    /// True coefficients by regressor name; `const` sets the intercept.
    pub beta_true: BTreeMap<String, f64>,
    pub time_invariant: BTreeSet<String>,
    pub dummies: BTreeSet<String>,
    pub unit_root: BTreeSet<String>,
    pub sigma_entity: f64,
    pub sigma_idio: f64,
    /// corr(u_i, a_i) for the first time-varying regressor.
    pub effect_correlation: f64,
    /// corr(endogenous regressor, ε).
    pub endogeneity_rho: f64,
    /// corr(endogenous regressor, (z1 + z2)/√2).
    pub instrument_strength: f64,
    /// Direct effect of z2 on y, which violates its exclusion.
    pub invalid_instrument: f64,
    /// Regressor made endogenous by [`generate_endogenous_panel`].
    pub endogenous: String,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            n_entities: 30,
            n_periods: 10,
            start_year: 2006,
            beta_true: BTreeMap::from([
                (INTERCEPT.to_string(), 1.0),
                ("x1".to_string(), 0.8),
                ("x2".to_string(), -0.5),
            ]),
            time_invariant: BTreeSet::new(),
            dummies: BTreeSet::new(),
            unit_root: BTreeSet::new(),
            sigma_entity: 1.0,
            sigma_idio: 1.0,
            effect_correlation: 0.0,
            endogeneity_rho: 0.0,
            instrument_strength: 0.8,
            invalid_instrument: 0.0,
            endogenous: "x1".to_string(),
            seed: 42,
        }
    }
}

impl DgpConfig {
    /// Regressor names in generation order (the intercept excluded).
    pub fn regressors(&self) -> Vec<&str> {
        self.beta_true
            .keys()
            .map(String::as_str)
            .filter(|n| *n != INTERCEPT)
            .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::Config(m));
        if self.n_entities == 0 || self.n_periods == 0 {
            return bad("n_entities and n_periods must be positive".into());
        }
        if self.n_entities > 26 * 26 * 26 - 1 {
            return bad("too many entities for three-letter partner codes".into());
        }
        for (name, v) in [
            ("sigma_entity", self.sigma_entity),
            ("sigma_idio", self.sigma_idio),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be a finite non-negative number"));
            }
        }
        for (name, v) in [
            ("effect_correlation", self.effect_correlation),
            ("endogeneity_rho", self.endogeneity_rho),
            ("instrument_strength", self.instrument_strength),
        ] {
            if !(-1.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [-1, 1]"));
            }
        }
        if self.instrument_strength.powi(2) + self.endogeneity_rho.powi(2) > 1.0 + 1e-12 {
            return bad("instrument_strength² + endogeneity_rho² must not exceed 1".into());
        }
        if !self.invalid_instrument.is_finite() {
            return bad("invalid_instrument must be finite".into());
        }
        for (name, b) in &self.beta_true {
            if !b.is_finite() {
                return bad(format!("coefficient for {name} is not finite"));
            }
            if name == OUTCOME || INSTRUMENTS.contains(&name.as_str()) || name.is_empty() {
                return bad(format!("regressor name {name:?} is reserved"));
            }
        }
        for set in [&self.time_invariant, &self.dummies, &self.unit_root] {
            for n in set {
                if !self.beta_true.contains_key(n) || n == INTERCEPT {
                    return bad(format!("{n:?} is not a regressor in beta_true"));
                }
            }
        }
        if let Some(n) = self.dummies.intersection(&self.unit_root).next() {
            return bad(format!(
                "{n:?} cannot be both a dummy and a unit-root series"
            ));
        }
        Ok(())
    }

    fn is_time_varying(&self, name: &str) -> bool {
        !self.time_invariant.contains(name) && !self.dummies.contains(name)
    }
}

/// FNV-1a, used to pick a stream per variable.
fn stream_of(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn rng_for(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_of(name));
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Partner codes AAA, AAB, …, skipping the reporter's.
pub fn partner_codes(n: usize) -> Vec<CountryCode> {
    let mut out = Vec::with_capacity(n);
    let mut i = 0usize;
    while out.len() < n {
        let s: String = [i / 676, (i / 26) % 26, i % 26]
            .iter()
            .map(|&d| (b'A' + d as u8) as char)
            .collect();
        i += 1;
        if s != "PER" {
            out.push(CountryCode::new(&s).expect("generated code is valid"));
        }
    }
    out
}

struct Grid {
    n: usize,
    t: usize,
}

impl Grid {
    fn idx(&self, e: usize, t: usize) -> usize {
        e * self.t + t
    }
    fn len(&self) -> usize {
        self.n * self.t
    }
}

/// Regressor values, entity-major, plus the entity-level component a_i.
fn draw_regressor(cfg: &DgpConfig, g: &Grid, name: &str) -> (Vec<f64>, Vec<f64>) {
    let mut rng = rng_for(cfg.seed, name);
    let mut values = vec![0.0; g.len()];
    let mut level = vec![0.0; g.n];
    for e in 0..g.n {
        if cfg.dummies.contains(name) {
            let v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            level[e] = v;
            (0..g.t).for_each(|t| values[g.idx(e, t)] = v);
        } else if cfg.time_invariant.contains(name) {
            let v = normal(&mut rng);
            level[e] = v;
            (0..g.t).for_each(|t| values[g.idx(e, t)] = v);
        } else if cfg.unit_root.contains(name) {
            let mut x = normal(&mut rng);
            level[e] = x;
            for t in 0..g.t {
                x += normal(&mut rng);
                values[g.idx(e, t)] = x;
            }
        } else {
            let a = normal(&mut rng);
            level[e] = a;
            for t in 0..g.t {
                values[g.idx(e, t)] = a + normal(&mut rng);
            }
        }
    }
    (values, level)
}

/// u_i with corr(u_i, anchor_i) = effect_correlation (anchor ~ N(0,1)).
fn entity_effects(cfg: &DgpConfig, anchor: Option<&[f64]>, n: usize) -> Vec<f64> {
    let mut rng = rng_for(cfg.seed, "__entity_effect");
    let c = cfg.effect_correlation;
    (0..n)
        .map(|e| {
            let v = normal(&mut rng);
            let mixed = match anchor {
                Some(a) => c * a[e] + (1.0 - c * c).sqrt() * v,
                None => v,
            };
            cfg.sigma_entity * mixed
        })
        .collect()
}

fn assemble(
    g: &Grid,
    cfg: &DgpConfig,
    columns: Vec<(String, Unit, Vec<f64>)>,
) -> Result<PanelDataset, SynthError> {
    let reporter = CountryCode::new("PER").expect("valid code");
    let partners = partner_codes(g.n);
    let mut obs = Vec::with_capacity(g.len() * columns.len());
    for (e, partner) in partners.iter().enumerate() {
        let entity = EntityId::new(reporter, *partner)?;
        for t in 0..g.t {
            let year = cfg.start_year + t as Year;
            for (name, _, values) in &columns {
                obs.push(Observation::new(
                    entity,
                    year,
                    name.clone(),
                    values[g.idx(e, t)],
                ));
            }
        }
    }
    let mut ds = build_panel(obs)?;
    for (name, unit, _) in &columns {
        ds.set_unit(name, *unit)?;
    }
    Ok(ds)
}

fn unit_of(cfg: &DgpConfig, name: &str) -> Unit {
    if cfg.dummies.contains(name) {
        Unit::Dummy
    } else {
        Unit::Ratio
    }
}

/// Panel with outcome `y` and the regressors of `cfg.beta_true`.
pub fn generate_gravity_panel(
    cfg: &DgpConfig,
) -> Result<(PanelDataset, BTreeMap<String, f64>), SynthError> {
    cfg.validate()?;
    let g = Grid {
        n: cfg.n_entities,
        t: cfg.n_periods,
    };
    let intercept = cfg.beta_true.get(INTERCEPT).copied().unwrap_or(0.0);
    let mut y = vec![intercept; g.len()];
    let mut columns = Vec::new();
    let mut anchor = None;
    for name in cfg.regressors() {
        let (values, level) = draw_regressor(cfg, &g, name);
        if anchor.is_none() && cfg.is_time_varying(name) && !cfg.unit_root.contains(name) {
            anchor = Some(level);
        }
        let b = cfg.beta_true[name];
        y.iter_mut().zip(&values).for_each(|(yi, x)| *yi += b * x);
        columns.push((name.to_string(), unit_of(cfg, name), values));
    }
    let u = entity_effects(cfg, anchor.as_deref(), g.n);
    let mut rng = rng_for(cfg.seed, "__idiosyncratic");
    for e in 0..g.n {
        for t in 0..g.t {
            y[g.idx(e, t)] += u[e] + cfg.sigma_idio * normal(&mut rng);
        }
    }
    columns.push((OUTCOME.to_string(), Unit::Ratio, y));
    let ds = assemble(&g, cfg, columns)?;
    Ok((ds, cfg.beta_true.clone()))
}

/// Panel whose regressor `cfg.endogenous` is correlated with ε.
///
/// x = s·(z1 + z2)/√2 + ρ·ε/σ + sqrt(1 − s² − ρ²)·v with z1, z2, v ~ N(0, 1),
/// so corr(x, ε) = ρ and corr(x, (z1 + z2)/√2) = s. With a non-zero
/// `invalid_instrument` z2 also enters y directly.
pub fn generate_endogenous_panel(
    cfg: &DgpConfig,
) -> Result<(PanelDataset, BTreeMap<String, f64>), SynthError> {
    cfg.validate()?;
    if !cfg.beta_true.contains_key(&cfg.endogenous) || cfg.endogenous == INTERCEPT {
        return Err(SynthError::Config(format!(
            "endogenous regressor {:?} is not in beta_true",
            cfg.endogenous
        )));
    }
    if !cfg.is_time_varying(&cfg.endogenous) || cfg.unit_root.contains(&cfg.endogenous) {
        return Err(SynthError::Config(
            "the endogenous regressor must be a stationary time-varying regressor".into(),
        ));
    }
    let g = Grid {
        n: cfg.n_entities,
        t: cfg.n_periods,
    };
    let (s, rho) = (cfg.instrument_strength, cfg.endogeneity_rho);
    let rest = (1.0 - s * s - rho * rho).max(0.0).sqrt();
    let draw_all = |name: &str| {
        let mut rng = rng_for(cfg.seed, name);
        (0..g.len()).map(|_| normal(&mut rng)).collect::<Vec<f64>>()
    };
    let z1 = draw_all(INSTRUMENTS[0]);
    let z2 = draw_all(INSTRUMENTS[1]);
    let eps = draw_all("__idiosyncratic");
    let v = draw_all("__endogenous_noise");

    let intercept = cfg.beta_true.get(INTERCEPT).copied().unwrap_or(0.0);
    let mut y = vec![intercept; g.len()];
    let mut columns = Vec::new();
    let mut anchor = None;
    for name in cfg.regressors() {
        let values = if name == cfg.endogenous {
            (0..g.len())
                .map(|i| {
                    s * (z1[i] + z2[i]) / std::f64::consts::SQRT_2 + rho * eps[i] + rest * v[i]
                })
                .collect()
        } else {
            let (values, level) = draw_regressor(cfg, &g, name);
            if anchor.is_none() && cfg.is_time_varying(name) && !cfg.unit_root.contains(name) {
                anchor = Some(level);
            }
            values
        };
        let b = cfg.beta_true[name];
        y.iter_mut().zip(&values).for_each(|(yi, x)| *yi += b * x);
        columns.push((name.to_string(), unit_of(cfg, name), values));
    }
    let u = entity_effects(cfg, anchor.as_deref(), g.n);
    for e in 0..g.n {
        for t in 0..g.t {
            let i = g.idx(e, t);
            y[i] += u[e] + cfg.sigma_idio * eps[i] + cfg.invalid_instrument * z2[i];
        }
    }
    columns.push((OUTCOME.to_string(), Unit::Ratio, y));
    columns.push((INSTRUMENTS[0].to_string(), Unit::Ratio, z1));
    columns.push((INSTRUMENTS[1].to_string(), Unit::Ratio, z2));
    let ds = assemble(&g, cfg, columns)?;
    Ok((ds, cfg.beta_true.clone()))
}

/// Panel of independent series `y` per entity: Gaussian random walks when
/// `unit_root`, white noise otherwise.
pub fn generate_series_panel(
    n_entities: usize,
    n_periods: usize,
    unit_root: bool,
    seed: u64,
) -> Result<PanelDataset, SynthError> {
    let cfg = DgpConfig {
        n_entities,
        n_periods,
        beta_true: BTreeMap::from([(OUTCOME.to_string() + "_series", 1.0)]),
        seed,
        ..DgpConfig::default()
    };
    cfg.validate()?;
    let g = Grid {
        n: n_entities,
        t: n_periods,
    };
    let mut rng = rng_for(seed, OUTCOME);
    let mut values = vec![0.0; g.len()];
    for e in 0..g.n {
        let mut level = 0.0;
        for t in 0..g.t {
            let draw = normal(&mut rng);
            level = if unit_root { level + draw } else { draw };
            values[g.idx(e, t)] = level;
        }
    }
    assemble(&g, &cfg, vec![(OUTCOME.to_string(), Unit::Ratio, values)])
}
