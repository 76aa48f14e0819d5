//! Run configuration, read from a TOML file.
//!
//! ```toml
//! [run]
//! variant = "synthetic"        # gmp | ctp | rtp | synthetic
//! out_dir = "out"
//! formats = ["markdown", "csv"]
//! alpha = 0.05
//!
//! [synthetic]                  # any DgpConfig field
//! n_entities = 40
//! effect_correlation = 0.8
//! ```
//!
//! The full schema lives in `docs/config.md`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::GmmSpec;
use crate::ingest::Variant;
use crate::panel::{ModelSpec, Year, YearWindow};
use crate::synth::DgpConfig;
use crate::unitroot::{Deterministics, DEFAULT_LAGS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Which panel the pipeline runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunVariant {
    Gmp,
    Ctp,
    Rtp,
    Synthetic,
}

impl RunVariant {
    pub fn study(&self) -> Option<Variant> {
        match self {
            RunVariant::Gmp => Some(Variant::Gmp),
            RunVariant::Ctp => Some(Variant::Ctp),
            RunVariant::Rtp => Some(Variant::Rtp),
            RunVariant::Synthetic => None,
        }
    }

    /// Default sample years of each study panel.
    pub fn default_window(&self) -> Option<YearWindow> {
        match self {
            RunVariant::Gmp | RunVariant::Ctp => Some(YearWindow::new(2006, 2015)),
            RunVariant::Rtp => Some(YearWindow::new(1994, 2015)),
            RunVariant::Synthetic => None,
        }
    }
}

impl fmt::Display for RunVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.study() {
            Some(v) => v.fmt(f),
            None => f.write_str("synthetic"),
        }
    }
}

impl FromStr for RunVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("synthetic") {
            return Ok(RunVariant::Synthetic);
        }
        s.parse::<Variant>().map(|v| match v {
            Variant::Gmp => RunVariant::Gmp,
            Variant::Ctp => RunVariant::Ctp,
            Variant::Rtp => RunVariant::Rtp,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Markdown,
    Csv,
}

impl OutputFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Markdown => "md",
            OutputFormat::Csv => "csv",
        }
    }

    /// Parses `markdown`, `csv` or `both`.
    pub fn parse_set(s: &str) -> Result<Vec<OutputFormat>, String> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(vec![OutputFormat::Markdown]),
            "csv" => Ok(vec![OutputFormat::Csv]),
            "both" => Ok(vec![OutputFormat::Markdown, OutputFormat::Csv]),
            _ => Err(format!(
                "unknown format {s:?} (expected markdown, csv or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogLevel {
    Error,
    Warn,
    #[default]
    Info,
    Debug,
}

impl FromStr for LogLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "error" => Ok(LogLevel::Error),
            "warn" | "warning" => Ok(LogLevel::Warn),
            "info" => Ok(LogLevel::Info),
            "debug" => Ok(LogLevel::Debug),
            _ => Err(format!("unknown log level {s:?}")),
        }
    }
}

impl fmt::Display for LogLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LogLevel::Error => "ERROR",
            LogLevel::Warn => "WARN",
            LogLevel::Info => "INFO",
            LogLevel::Debug => "DEBUG",
        })
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<OutputFormat> {
    vec![OutputFormat::Markdown, OutputFormat::Csv]
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub variant: RunVariant,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<OutputFormat>,
    /// Hausman level below which IV-GMM is run.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub log_level: LogLevel,
}

/// Source files of a study panel.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub trade: Option<PathBuf>,
    pub indicators: Option<PathBuf>,
    pub statics: Option<PathBuf>,
    pub memberships: Option<PathBuf>,
    pub window_start: Option<Year>,
    pub window_end: Option<Year>,
    pub reporter: Option<String>,
}

fn default_true() -> bool {
    true
}

fn default_lags() -> usize {
    DEFAULT_LAGS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitRootSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_lags")]
    pub lags: usize,
    #[serde(default)]
    pub deterministics: Deterministics,
    /// Model terms to test; defaults to the dependent and every continuous
    /// time-varying regressor.
    #[serde(default)]
    pub terms: Option<Vec<String>>,
}

impl Default for UnitRootSection {
    fn default() -> Self {
        UnitRootSection {
            enabled: true,
            lags: DEFAULT_LAGS,
            deterministics: Deterministics::default(),
            terms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    #[serde(default)]
    pub input: InputSection,
    #[serde(default)]
    pub synthetic: Option<DgpConfig>,
    /// Overrides the variant's default model.
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub unitroot: UnitRootSection,
    /// Overrides the variant's default instrumentation.
    #[serde(default)]
    pub gmm: Option<GmmSpec>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse(e.message().replace('\n', " ").trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates `path`; relative paths inside are taken relative
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.run.out_dir);
        for p in [
            &mut self.input.trade,
            &mut self.input.indicators,
            &mut self.input.statics,
            &mut self.input.memberships,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(self.run.alpha > 0.0 && self.run.alpha < 1.0) {
            return bad("run.alpha must lie in (0, 1)");
        }
        if self.run.formats.is_empty() {
            return bad("run.formats must name at least one of markdown, csv");
        }
        if let Some(m) = &self.model {
            m.validate()
                .map_err(|e| ConfigError::Invalid(format!("model: {e}")))?;
        }
        match self.run.variant {
            RunVariant::Synthetic => {
                if let Some(d) = &self.synthetic {
                    d.validate()
                        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
                }
            }
            _ => {
                if self.synthetic.is_some() {
                    return bad("[synthetic] applies only to variant = \"synthetic\"");
                }
                for (name, p) in [
                    ("trade", &self.input.trade),
                    ("indicators", &self.input.indicators),
                    ("statics", &self.input.statics),
                ] {
                    if p.is_none() {
                        return Err(ConfigError::Invalid(format!(
                            "input.{name} is required for variant {}",
                            self.run.variant
                        )));
                    }
                }
            }
        }
        if let (Some(a), Some(b)) = (self.input.window_start, self.input.window_end) {
            if a > b {
                return bad("input.window_start is after input.window_end");
            }
        }
        Ok(())
    }

    /// Sample window: configured bounds over the variant default.
    pub fn window(&self) -> Option<YearWindow> {
        let d = self.run.variant.default_window()?;
        Some(YearWindow::new(
            self.input.window_start.unwrap_or(d.start),
            self.input.window_end.unwrap_or(d.end),
        ))
    }

    pub fn dgp(&self) -> DgpConfig {
        self.synthetic.clone().unwrap_or_default()
    }
}
