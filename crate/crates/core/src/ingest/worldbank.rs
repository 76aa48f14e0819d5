//! Client for the World Bank indicators API (v2, JSON).

use std::time::Duration;

use serde_json::Value;

use super::{IndicatorKind, IndicatorRecord, IngestError};
use crate::panel::{CountryCode, Year, YearWindow};

pub const WB_DEFAULT_BASE: &str = "https://api.worldbank.org/v2";
const DEFAULT_PER_PAGE: usize = 1000;
const MAX_PAGES: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Minimal blocking GET transport.
pub trait HttpGet {
    fn get(&self, url: &str) -> Result<HttpResponse, String>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, IngestError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .map_err(|e| IngestError::Transport {
                url: String::new(),
                message: e.to_string(),
            })?;
        Ok(ReqwestTransport { client })
    }
}

impl HttpGet for ReqwestTransport {
    fn get(&self, url: &str) -> Result<HttpResponse, String> {
        let resp = self.client.get(url).send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

/// Indicator kind and the factor converting the API value to it.
pub fn indicator_kind_for_code(code: &str) -> Option<(IndicatorKind, f64)> {
    match code {
        "NY.GDP.MKTP.CD" => Some((IndicatorKind::GdpUsd, 1.0)),
        "NY.GNP.PCAP.CD" => Some((IndicatorKind::GnipcUsd, 1.0)),
        "NY.GDP.PCAP.CD" => Some((IndicatorKind::GdppcUsd, 1.0)),
        // percent per year
        "FP.CPI.TOTL.ZG" => Some((IndicatorKind::InflationRate, 0.01)),
        "PA.NUS.FCRF" => Some((IndicatorKind::FxRate, 1.0)),
        "FP.CPI.TOTL" => Some((IndicatorKind::CpiIndex, 1.0)),
        _ => None,
    }
}

/// Fetches indicators over HTTPS with the default page size.
pub fn fetch_indicators(
    base_url: &str,
    indicator_codes: &[&str],
    countries: &[CountryCode],
    window: YearWindow,
) -> Result<Vec<IndicatorRecord>, IngestError> {
    let transport = ReqwestTransport::new()?;
    fetch_indicators_with(
        &transport,
        base_url,
        indicator_codes,
        countries,
        window,
        DEFAULT_PER_PAGE,
    )
}

/// Fetches every page of each indicator for `countries` over `window`.
/// Null values are skipped; records come back sorted by country,
/// indicator and ascending year. Requests are sequential.
pub fn fetch_indicators_with(
    transport: &dyn HttpGet,
    base_url: &str,
    indicator_codes: &[&str],
    countries: &[CountryCode],
    window: YearWindow,
    per_page: usize,
) -> Result<Vec<IndicatorRecord>, IngestError> {
    if countries.is_empty() {
        return Err(IngestError::EmptyCountries);
    }
    if indicator_codes.is_empty() {
        return Err(IngestError::EmptyCodes);
    }
    let country_list = countries
        .iter()
        .map(|c| c.as_str())
        .collect::<Vec<_>>()
        .join(";");
    let base = base_url.trim_end_matches('/');
    let mut out = Vec::new();
    for code in indicator_codes {
        let (kind, scale) = indicator_kind_for_code(code)
            .ok_or_else(|| IngestError::UnknownIndicatorCode(code.to_string()))?;
        let mut page = 1u64;
        loop {
            let url = format!(
                "{base}/country/{country_list}/indicator/{code}?date={}:{}&format=json&per_page={per_page}&page={page}",
                window.start, window.end
            );
            let resp = transport
                .get(&url)
                .map_err(|message| IngestError::Transport {
                    url: url.clone(),
                    message,
                })?;
            if !(200..300).contains(&resp.status) {
                return Err(IngestError::Http {
                    status: resp.status,
                    url,
                });
            }
            let pages = parse_page(&url, &resp.body, kind, scale, &mut out)?;
            if page >= pages || page >= MAX_PAGES {
                break;
            }
            page += 1;
        }
    }
    out.sort_by(|a, b| (a.country, a.indicator, a.year).cmp(&(b.country, b.indicator, b.year)));
    Ok(out)
}

/// Parses one `[metadata, data]` envelope; returns the page count.
fn parse_page(
    url: &str,
    body: &str,
    kind: IndicatorKind,
    scale: f64,
    out: &mut Vec<IndicatorRecord>,
) -> Result<u64, IngestError> {
    let bad = |message: String| IngestError::Envelope {
        url: url.to_string(),
        message,
    };
    let v: Value = serde_json::from_str(body).map_err(|e| bad(e.to_string()))?;
    let arr = v
        .as_array()
        .ok_or_else(|| bad("expected a JSON array".into()))?;
    let meta = arr.first().ok_or_else(|| bad("empty envelope".into()))?;
    if let Some(msg) = meta.get("message") {
        return Err(bad(format!("API error: {msg}")));
    }
    let pages = meta
        .get("pages")
        .and_then(|p| p.as_u64().or_else(|| p.as_str()?.parse().ok()))
        .ok_or_else(|| bad("metadata lacks a page count".into()))?;
    let data = match arr.get(1) {
        None | Some(Value::Null) => return Ok(pages),
        Some(Value::Array(d)) => d,
        Some(_) => return Err(bad("data element is not an array".into())),
    };
    for item in data {
        let Some(value) = item.get("value").and_then(Value::as_f64) else {
            continue;
        };
        let iso3 = item
            .get("countryiso3code")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("record lacks countryiso3code".into()))?;
        let Ok(country) = CountryCode::new(iso3) else {
            // regional aggregates carry an empty code
            continue;
        };
        let year: Year = item
            .get("date")
            .and_then(Value::as_str)
            .and_then(|d| d.parse().ok())
            .ok_or_else(|| bad(format!("record for {iso3} has no usable date")))?;
        let value = value * scale;
        if kind.must_be_positive() && value <= 0.0 {
            continue;
        }
        out.push(IndicatorRecord {
            country,
            year,
            indicator: kind,
            value,
        });
    }
    Ok(pages)
}
