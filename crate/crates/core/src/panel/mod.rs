//! Panel data model for bilateral trade.
//!
//! A [`PanelDataset`] is a rectangular entity × year store of named variables
//! with a presence mask. Entities are directed country pairs. Model
//! specifications ([`ModelSpec`]) are realized against a dataset into a
//! numeric [`RegressionProblem`] by [`design_matrix`], with listwise deletion
//! and a full drop log.

mod dataset;
mod demean;
mod design;
mod spec;
mod transform;

pub use dataset::{build_panel, Observation, PanelDataset, Unit, VariableGrid};
pub use demean::{demean_within, quasi_demean};
pub use design::{
    design_matrix, materialize_term, ColumnMeta, DropReason, DropRecord, RegressionProblem, RowKey,
    INTERCEPT,
};
pub use spec::{ModelSpec, Role, SampleFilter, Step, Term};
pub use transform::{apply_transform, DummyPredicate, TransformKind, TransformSpec};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Calendar year.
pub type Year = i32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PanelError {
    #[error("invalid country code {0:?}: expected 3 uppercase ASCII letters")]
    InvalidCountryCode(String),
    #[error("reporter and partner are the same country ({0})")]
    SelfPair(CountryCode),
    #[error("duplicate observation ({entity}, {year}, {variable})")]
    DuplicateKey {
        entity: EntityId,
        year: Year,
        variable: String,
    },
    #[error("non-finite value for ({entity}, {year}, {variable})")]
    NonFinite {
        entity: EntityId,
        year: Year,
        variable: String,
    },
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("variable {0:?} already exists")]
    VariableExists(String),
    #[error("log of non-positive value {value} at ({entity}, {year}, {variable})")]
    LogDomain {
        entity: EntityId,
        year: Year,
        variable: String,
        value: f64,
    },
    #[error(
        "dummy variable {variable:?} holds {value} at ({entity}, {year}); only 0 or 1 allowed"
    )]
    NotDummy {
        entity: EntityId,
        year: Year,
        variable: String,
        value: f64,
    },
    #[error("lag order must be at least 1")]
    ZeroLag,
    #[error("transform {kind} expects {expected} source variable(s), got {got}")]
    SourceCount {
        kind: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid transform step {0:?}")]
    InvalidStep(String),
    #[error("invalid dummy predicate {0:?}")]
    InvalidPredicate(String),
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("dependent variable {0:?} also listed as a regressor")]
    DependentAsRegressor(String),
    #[error("dummy term {0:?} cannot be log-transformed")]
    LoggedDummy(String),
    #[error("no observations retained after listwise deletion")]
    NoObservations,
    #[error("no within variation: every column is time-invariant")]
    NoWithinVariation,
    #[error("within transform needs at least one entity with two or more observations")]
    InsufficientWithin,
    #[error("quasi-demeaning weight {weight} for {entity} is outside [0, 1]")]
    WeightOutOfRange { entity: EntityId, weight: f64 },
    #[error("no quasi-demeaning weight supplied for {0}")]
    MissingWeight(EntityId),
    #[error("inconsistent problem dimensions: {0}")]
    Dimension(String),
}

/// ISO 3166-1 alpha-3 country code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CountryCode([u8; 3]);

impl CountryCode {
    pub fn new(code: &str) -> Result<Self, PanelError> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_uppercase) {
            return Err(PanelError::InvalidCountryCode(code.to_string()));
        }
        Ok(CountryCode([bytes[0], bytes[1], bytes[2]]))
    }

    pub fn as_str(&self) -> &str {
        // Constructor admits ASCII only.
        std::str::from_utf8(&self.0).expect("ascii country code")
    }
}

impl FromStr for CountryCode {
    type Err = PanelError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CountryCode::new(s)
    }
}

impl fmt::Display for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for CountryCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

impl Serialize for CountryCode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for CountryCode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CountryCode::new(&s).map_err(serde::de::Error::custom)
    }
}

/// A directed trading pair: exports flow from `reporter` to `partner`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EntityId {
    reporter: CountryCode,
    partner: CountryCode,
}

impl EntityId {
    pub fn new(reporter: CountryCode, partner: CountryCode) -> Result<Self, PanelError> {
        if reporter == partner {
            return Err(PanelError::SelfPair(reporter));
        }
        Ok(EntityId { reporter, partner })
    }

    /// Parses two ISO3 strings.
    pub fn parse(reporter: &str, partner: &str) -> Result<Self, PanelError> {
        EntityId::new(CountryCode::new(reporter)?, CountryCode::new(partner)?)
    }

    pub fn reporter(&self) -> CountryCode {
        self.reporter
    }

    pub fn partner(&self) -> CountryCode {
        self.partner
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.reporter, self.partner)
    }
}

impl fmt::Debug for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for EntityId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for EntityId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let (r, p) = s
            .split_once('-')
            .ok_or_else(|| serde::de::Error::custom(format!("bad entity id {s:?}")))?;
        EntityId::parse(r, p).map_err(serde::de::Error::custom)
    }
}

/// Inclusive range of panel years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub start: Year,
    pub end: Year,
}

impl YearWindow {
    pub fn new(start: Year, end: Year) -> Self {
        YearWindow { start, end }
    }

    pub fn contains(&self, year: Year) -> bool {
        year >= self.start && year <= self.end
    }

    pub fn years(&self) -> impl Iterator<Item = Year> {
        self.start..=self.end
    }
}
