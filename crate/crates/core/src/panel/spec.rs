use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CountryCode, PanelError, Year, INTERCEPT};
use crate::estimators::Method;

/// One step of a term's transform chain, applied left to right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Log,
    Log1p,
    Lag(usize),
}

impl FromStr for Step {
    type Err = PanelError;

    /// Accepts `log`, `log1p`, `lag(2)` or `lag2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t {
            "log" => return Ok(Step::Log),
            "log1p" => return Ok(Step::Log1p),
            _ => {}
        }
        let k = t
            .strip_prefix("lag")
            .map(|r| r.trim_start_matches('(').trim_end_matches(')'))
            .and_then(|r| r.parse::<usize>().ok())
            .ok_or_else(|| PanelError::InvalidStep(s.to_string()))?;
        if k == 0 {
            return Err(PanelError::ZeroLag);
        }
        Ok(Step::Lag(k))
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Log => f.write_str("log"),
            Step::Log1p => f.write_str("log1p"),
            Step::Lag(k) => write!(f, "lag({k})"),
        }
    }
}

impl Serialize for Step {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Step {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Continuous,
    Dummy,
}

/// A model column: a dataset variable passed through a transform chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub name: String,
    pub variable: String,
    #[serde(default)]
    pub transforms: Vec<Step>,
    #[serde(default)]
    pub role: Role,
    /// Row label for rendered tables.
    #[serde(default)]
    pub label: Option<String>,
}

impl Term {
    pub fn new(name: &str, variable: &str, transforms: &[Step]) -> Self {
        Term {
            name: name.to_string(),
            variable: variable.to_string(),
            transforms: transforms.to_vec(),
            role: Role::Continuous,
            label: None,
        }
    }

    pub fn dummy(name: &str, variable: &str) -> Self {
        Term {
            role: Role::Dummy,
            ..Term::new(name, variable, &[])
        }
    }

    pub fn with_label(mut self, label: &str) -> Self {
        self.label = Some(label.to_string());
        self
    }

    /// Copy of this term with one more lag appended, named `L{k}.{name}`.
    pub fn lagged(&self, k: usize) -> Term {
        let mut t = self.clone();
        t.name = format!("L{k}.{}", self.name);
        t.transforms.push(Step::Lag(k));
        t.label = None;
        t
    }

    pub fn display_label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

/// Restricts the estimation sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleFilter {
    #[serde(default)]
    pub partners: Option<BTreeSet<CountryCode>>,
    #[serde(default)]
    pub years: Option<(Year, Year)>,
}

impl SampleFilter {
    pub fn admits(&self, partner: CountryCode, year: Year) -> bool {
        let partner_ok = self.partners.as_ref().is_none_or(|s| s.contains(&partner));
        let year_ok = self.years.is_none_or(|(a, b)| year >= a && year <= b);
        partner_ok && year_ok
    }
}

/// Declarative description of one gravity regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dependent: Term,
    pub regressors: Vec<Term>,
    /// Excluded instruments for IV-GMM; realized alongside the design matrix.
    #[serde(default)]
    pub instruments: Vec<Term>,
    #[serde(default = "default_true")]
    pub include_intercept: bool,
    #[serde(default)]
    pub estimator_chain: Vec<Method>,
    #[serde(default)]
    pub sample_filter: Option<SampleFilter>,
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    pub fn new(dependent: Term, regressors: Vec<Term>) -> Self {
        ModelSpec {
            dependent,
            regressors,
            instruments: Vec::new(),
            include_intercept: true,
            estimator_chain: vec![Method::FixedEffects, Method::RandomEffects, Method::IvGmm],
            sample_filter: None,
        }
    }

    pub fn validate(&self) -> Result<(), PanelError> {
        let mut seen = HashSet::new();
        if self.include_intercept {
            seen.insert(INTERCEPT);
        }
        for term in self.regressors.iter().chain(&self.instruments) {
            if term.name == self.dependent.name {
                return Err(PanelError::DependentAsRegressor(term.name.clone()));
            }
            if !seen.insert(term.name.as_str()) {
                return Err(PanelError::DuplicateColumn(term.name.clone()));
            }
        }
        for term in std::iter::once(&self.dependent)
            .chain(&self.regressors)
            .chain(&self.instruments)
        {
            if term.role == Role::Dummy
                && term
                    .transforms
                    .iter()
                    .any(|s| matches!(s, Step::Log | Step::Log1p))
            {
                return Err(PanelError::LoggedDummy(term.name.clone()));
            }
            if term.transforms.contains(&Step::Lag(0)) {
                return Err(PanelError::ZeroLag);
            }
        }
        Ok(())
    }

    pub fn term(&self, name: &str) -> Option<&Term> {
        std::iter::once(&self.dependent)
            .chain(&self.regressors)
            .chain(&self.instruments)
            .find(|t| t.name == name)
    }
}
