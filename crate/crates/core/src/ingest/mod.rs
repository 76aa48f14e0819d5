//! Raw input files, the World Bank indicator client, derived variables and
//! assembly of the gravity panels.
//!
//! CSV schemas (UTF-8, header row required, `.` decimals):
//!
//! | file        | header                                                  |
//! |-------------|---------------------------------------------------------|
//! | trade flows | `reporter,partner,year,export_value_usd`                |
//! | indicators  | `country,year,indicator,value`                          |
//! | pair static | `partner,distance_km,common_language,common_border`     |
//! | memberships | `organization,country,accession_year,status`            |

mod assemble;
mod model;
mod worldbank;

pub use assemble::{
    assemble_gravity_panel, assemble_gravity_panel_for, compute_real_fx, Assembled, IngestData,
    Variant, REPORTER,
};
pub use model::{default_gmm_spec, default_model_spec};
pub use worldbank::{
    fetch_indicators, fetch_indicators_with, indicator_kind_for_code, HttpGet, HttpResponse,
    ReqwestTransport, WB_DEFAULT_BASE,
};

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{CountryCode, PanelError, Year};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("missing column {column:?}")]
    MissingColumn { column: String },
    #[error("line {line}: column {column:?}: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Validation { line: u64, message: String },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },
    #[error("malformed response envelope from {url}: {message}")]
    Envelope { url: String, message: String },
    #[error("no countries requested")]
    EmptyCountries,
    #[error("no indicator codes requested")]
    EmptyCodes,
    #[error("unknown indicator code {0:?}")]
    UnknownIndicatorCode(String),
    #[error("non-positive input to real exchange rate: {0}")]
    NonPositiveFx(String),
    #[error("variant {variant} needs inflation_rate indicators, none supplied")]
    MissingInflation { variant: Variant },
    #[error("duplicate indicator ({country}, {year}, {indicator})")]
    DuplicateIndicator {
        country: CountryCode,
        year: Year,
        indicator: IndicatorKind,
    },
    #[error("reporter {0} has no indicator data")]
    MissingReporter(CountryCode),
    #[error("window {start}-{end} is inconsistent with variant {variant}")]
    Window {
        variant: Variant,
        start: Year,
        end: Year,
    },
    #[error(transparent)]
    Panel(#[from] PanelError),
}

/// Non-fatal data issue, printed as `WARN ingest <code> <detail>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IngestWarning {
    pub code: String,
    pub detail: String,
}

impl IngestWarning {
    pub fn new(code: &str, detail: impl Into<String>) -> Self {
        IngestWarning {
            code: code.to_string(),
            detail: detail.into(),
        }
    }
}

impl fmt::Display for IngestWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WARN ingest {} {}", self.code, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeFlowRecord {
    pub reporter: CountryCode,
    pub partner: CountryCode,
    pub year: Year,
    /// Export value in USD.
    pub export_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    GdpUsd,
    GnipcUsd,
    GdppcUsd,
    /// Fraction per year (0.033 for 3.3%).
    InflationRate,
    /// Local currency per USD.
    FxRate,
    CpiIndex,
}

impl IndicatorKind {
    pub const ALL: [IndicatorKind; 6] = [
        IndicatorKind::GdpUsd,
        IndicatorKind::GnipcUsd,
        IndicatorKind::GdppcUsd,
        IndicatorKind::InflationRate,
        IndicatorKind::FxRate,
        IndicatorKind::CpiIndex,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            IndicatorKind::GdpUsd => "gdp_usd",
            IndicatorKind::GnipcUsd => "gnipc_usd",
            IndicatorKind::GdppcUsd => "gdppc_usd",
            IndicatorKind::InflationRate => "inflation_rate",
            IndicatorKind::FxRate => "fx_rate",
            IndicatorKind::CpiIndex => "cpi_index",
        }
    }

    fn must_be_positive(&self) -> bool {
        matches!(
            self,
            IndicatorKind::GdpUsd
                | IndicatorKind::GnipcUsd
                | IndicatorKind::GdppcUsd
                | IndicatorKind::FxRate
                | IndicatorKind::CpiIndex
        )
    }
}

impl fmt::Display for IndicatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for IndicatorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IndicatorKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| format!("unknown indicator {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRecord {
    pub country: CountryCode,
    pub year: Year,
    pub indicator: IndicatorKind,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStaticRecord {
    pub partner: CountryCode,
    pub distance_km: f64,
    pub common_language: bool,
    pub common_border: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Organization {
    #[serde(rename = "APEC")]
    Apec,
    #[serde(rename = "CAN")]
    Can,
    #[serde(rename = "MERCOSUR")]
    Mercosur,
    #[serde(rename = "EU")]
    Eu,
}

impl Organization {
    pub const ALL: [Organization; 4] = [
        Organization::Apec,
        Organization::Can,
        Organization::Mercosur,
        Organization::Eu,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Organization::Apec => "APEC",
            Organization::Can => "CAN",
            Organization::Mercosur => "MERCOSUR",
            Organization::Eu => "EU",
        }
    }
}

impl fmt::Display for Organization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Organization {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Organization::ALL
            .into_iter()
            .find(|o| o.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown organization {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipStatus {
    Member,
    Associate,
}

impl FromStr for MembershipStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "member" => Ok(MembershipStatus::Member),
            "associate" => Ok(MembershipStatus::Associate),
            _ => Err(format!("status must be member or associate, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipRecord {
    pub organization: Organization,
    pub country: CountryCode,
    pub accession_year: Year,
    pub status: MembershipStatus,
}

/// Header-indexed strict CSV reader shared by the record parsers.
struct Sheet<R: Read> {
    reader: csv::Reader<R>,
    index: Vec<usize>,
}

struct Row {
    line: u64,
    fields: Vec<String>,
}

impl<R: Read> Sheet<R> {
    fn open(stream: R, columns: &'static [&'static str]) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(stream);
        let headers = reader
            .headers()
            .map_err(|e| IngestError::Csv(e.to_string()))?
            .clone();
        let index = columns
            .iter()
            .map(|c| {
                headers
                    .iter()
                    .position(|h| h == *c)
                    .ok_or_else(|| IngestError::MissingColumn {
                        column: c.to_string(),
                    })
            })
            .collect::<Result<_, _>>()?;
        Ok(Sheet { reader, index })
    }

    fn rows(mut self) -> Result<Vec<Row>, IngestError> {
        let mut out = Vec::new();
        for rec in self.reader.records() {
            let rec = rec.map_err(|e| IngestError::Csv(e.to_string()))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let fields = self
                .index
                .iter()
                .map(|&i| rec.get(i).unwrap_or("").to_string())
                .collect();
            out.push(Row { line, fields });
        }
        Ok(out)
    }
}

impl Row {
    fn parse<T: FromStr>(&self, i: usize, column: &str) -> Result<T, IngestError>
    where
        T::Err: fmt::Display,
    {
        let raw = &self.fields[i];
        if raw.is_empty() {
            return Err(IngestError::Parse {
                line: self.line,
                column: column.to_string(),
                message: "empty field".into(),
            });
        }
        raw.parse::<T>().map_err(|e| IngestError::Parse {
            line: self.line,
            column: column.to_string(),
            message: format!("{raw:?}: {e}"),
        })
    }

    fn number(&self, i: usize, column: &str) -> Result<f64, IngestError> {
        let v: f64 = self.parse(i, column)?;
        if !v.is_finite() {
            return Err(IngestError::Validation {
                line: self.line,
                message: format!("{column} must be finite"),
            });
        }
        Ok(v)
    }

    fn flag(&self, i: usize, column: &str) -> Result<bool, IngestError> {
        match self.fields[i].as_str() {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(IngestError::Parse {
                line: self.line,
                column: column.to_string(),
                message: format!("{other:?}: expected 0 or 1"),
            }),
        }
    }

    fn invalid(&self, message: impl Into<String>) -> IngestError {
        IngestError::Validation {
            line: self.line,
            message: message.into(),
        }
    }
}

const TRADE_COLUMNS: &[&str] = &["reporter", "partner", "year", "export_value_usd"];
const INDICATOR_COLUMNS: &[&str] = &["country", "year", "indicator", "value"];
const STATIC_COLUMNS: &[&str] = &["partner", "distance_km", "common_language", "common_border"];
const MEMBERSHIP_COLUMNS: &[&str] = &["organization", "country", "accession_year", "status"];

pub fn read_trade_csv(stream: impl Read) -> Result<Vec<TradeFlowRecord>, IngestError> {
    let rows = Sheet::open(stream, TRADE_COLUMNS)?.rows()?;
    rows.iter()
        .map(|r| {
            let rec = TradeFlowRecord {
                reporter: r.parse(0, "reporter")?,
                partner: r.parse(1, "partner")?,
                year: r.parse(2, "year")?,
                export_value: r.number(3, "export_value_usd")?,
            };
            if rec.export_value < 0.0 {
                return Err(r.invalid(format!(
                    "export_value_usd must be non-negative, got {}",
                    rec.export_value
                )));
            }
            if rec.reporter == rec.partner {
                return Err(r.invalid(format!("reporter equals partner ({})", rec.reporter)));
            }
            Ok(rec)
        })
        .collect()
}

pub fn read_indicator_csv(stream: impl Read) -> Result<Vec<IndicatorRecord>, IngestError> {
    let rows = Sheet::open(stream, INDICATOR_COLUMNS)?.rows()?;
    rows.iter()
        .map(|r| {
            let rec = IndicatorRecord {
                country: r.parse(0, "country")?,
                year: r.parse(1, "year")?,
                indicator: r.parse(2, "indicator")?,
                value: r.number(3, "value")?,
            };
            if rec.indicator.must_be_positive() && rec.value <= 0.0 {
                return Err(r.invalid(format!(
                    "{} must be positive, got {}",
                    rec.indicator, rec.value
                )));
            }
            Ok(rec)
        })
        .collect()
}

pub fn read_pair_static_csv(stream: impl Read) -> Result<Vec<PairStaticRecord>, IngestError> {
    let rows = Sheet::open(stream, STATIC_COLUMNS)?.rows()?;
    let mut seen = BTreeSet::new();
    rows.iter()
        .map(|r| {
            let rec = PairStaticRecord {
                partner: r.parse(0, "partner")?,
                distance_km: r.number(1, "distance_km")?,
                common_language: r.flag(2, "common_language")?,
                common_border: r.flag(3, "common_border")?,
            };
            if rec.distance_km <= 0.0 {
                return Err(r.invalid(format!(
                    "distance_km must be positive, got {}",
                    rec.distance_km
                )));
            }
            if !seen.insert(rec.partner) {
                return Err(r.invalid(format!("duplicate partner {}", rec.partner)));
            }
            Ok(rec)
        })
        .collect()
}

pub fn read_membership_csv(stream: impl Read) -> Result<Vec<MembershipRecord>, IngestError> {
    let rows = Sheet::open(stream, MEMBERSHIP_COLUMNS)?.rows()?;
    let mut seen = BTreeSet::new();
    rows.iter()
        .map(|r| {
            let rec = MembershipRecord {
                organization: r.parse(0, "organization")?,
                country: r.parse(1, "country")?,
                accession_year: r.parse(2, "accession_year")?,
                status: r.parse(3, "status")?,
            };
            if !seen.insert((rec.organization, rec.country)) {
                return Err(r.invalid(format!(
                    "duplicate membership ({}, {})",
                    rec.organization, rec.country
                )));
            }
            Ok(rec)
        })
        .collect()
}

fn open_file(path: &Path) -> Result<std::fs::File, IngestError> {
    std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Attaches the file path to parse errors.
fn with_path<T>(path: &Path, r: Result<T, IngestError>) -> Result<T, IngestError> {
    r.map_err(|e| match e {
        IngestError::Io { .. } => e,
        other => IngestError::Io {
            path: path.display().to_string(),
            message: other.to_string(),
        },
    })
}

pub fn read_trade_file(path: &Path) -> Result<Vec<TradeFlowRecord>, IngestError> {
    with_path(path, read_trade_csv(open_file(path)?))
}

pub fn read_indicator_file(path: &Path) -> Result<Vec<IndicatorRecord>, IngestError> {
    with_path(path, read_indicator_csv(open_file(path)?))
}

pub fn read_pair_static_file(path: &Path) -> Result<Vec<PairStaticRecord>, IngestError> {
    with_path(path, read_pair_static_csv(open_file(path)?))
}

pub fn read_membership_file(path: &Path) -> Result<Vec<MembershipRecord>, IngestError> {
    with_path(path, read_membership_csv(open_file(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trade_row() {
        let csv = "reporter,partner,year,export_value_usd\nPER,CHN,2012,7849000000\n";
        let r = read_trade_csv(csv.as_bytes()).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].partner.as_str(), "CHN");
        assert_eq!(r[0].year, 2012);
        assert_eq!(r[0].export_value, 7.849e9);
    }

    #[test]
    fn malformed_year_cites_line() {
        let csv = "reporter,partner,year,export_value_usd\nPER,CHN,20x2,1\n";
        let e = read_trade_csv(csv.as_bytes()).unwrap_err();
        assert!(matches!(e, IngestError::Parse { line: 2, .. }), "{e:?}");
        assert!(e.to_string().contains("line 2"));
    }

    #[test]
    fn negative_export_rejected() {
        let csv = "reporter,partner,year,export_value_usd\nPER,CHN,2012,-5\n";
        assert!(matches!(
            read_trade_csv(csv.as_bytes()),
            Err(IngestError::Validation { line: 2, .. })
        ));
    }

    #[test]
    fn missing_column_named() {
        let csv = "reporter,partner,year\nPER,CHN,2012\n";
        assert_eq!(
            read_trade_csv(csv.as_bytes()).unwrap_err(),
            IngestError::MissingColumn {
                column: "export_value_usd".into()
            }
        );
    }

    #[test]
    fn indicator_rows() {
        let ok = "country,year,indicator,value\nPER,2015,gdp_usd,189800000000\n";
        let r = read_indicator_csv(ok.as_bytes()).unwrap();
        assert_eq!(r[0].indicator, IndicatorKind::GdpUsd);
        assert_eq!(r[0].value, 1.898e11);
        let bad = "country,year,indicator,value\nCHL,,9999,\n";
        let e = read_indicator_csv(bad.as_bytes()).unwrap_err();
        assert!(
            matches!(&e, IngestError::Parse { column, .. } if column == "year"),
            "{e:?}"
        );
        let neg = "country,year,indicator,value\nCHL,2010,gdp_usd,-1\n";
        assert!(read_indicator_csv(neg.as_bytes()).is_err());
    }

    #[test]
    fn static_row() {
        let csv = "partner,distance_km,common_language,common_border\nBRA,3163,1,1\n";
        let r = read_pair_static_csv(csv.as_bytes()).unwrap();
        assert_eq!(r[0].distance_km, 3163.0);
        assert!(r[0].common_language && r[0].common_border);
        let bad = "partner,distance_km,common_language,common_border\nBRA,3163,yes,1\n";
        assert!(read_pair_static_csv(bad.as_bytes()).is_err());
    }

    #[test]
    fn membership_rows() {
        let csv = "organization,country,accession_year,status\nMERCOSUR,PER,2003,associate\nAPEC,CHL,1994,member\n";
        let r = read_membership_csv(csv.as_bytes()).unwrap();
        assert_eq!(r[0].organization, Organization::Mercosur);
        assert_eq!(r[0].status, MembershipStatus::Associate);
        let dup = "organization,country,accession_year,status\nCAN,BOL,1969,member\nCAN,BOL,1970,member\n";
        assert!(read_membership_csv(dup.as_bytes()).is_err());
    }

    #[test]
    fn warning_line_format() {
        let w = IngestWarning::new("unknown_partner", "XYZ has no indicator data");
        assert_eq!(
            w.to_string(),
            "WARN ingest unknown_partner XYZ has no indicator data"
        );
    }
}
