use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    IndicatorKind, IndicatorRecord, IngestError, IngestWarning, MembershipRecord, Organization,
    PairStaticRecord, TradeFlowRecord,
};
use crate::panel::{
    build_panel, CountryCode, EntityId, Observation, PanelDataset, Unit, Year, YearWindow,
};

/// Default reporting country.
pub const REPORTER: &str = "PER";

/// Study panel layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// All partners, aggregate exports.
    Gmp,
    /// Copper exports with importer-demand dummies and lagged inflation.
    Ctp,
    /// MERCOSUR members and associates only, no per-capita income terms.
    Rtp,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Gmp => "GMP",
            Variant::Ctp => "CTP",
            Variant::Rtp => "RTP",
        })
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gmp" => Ok(Variant::Gmp),
            "ctp" => Ok(Variant::Ctp),
            "rtp" => Ok(Variant::Rtp),
            _ => Err(format!("unknown variant {s:?} (expected gmp, ctp or rtp)")),
        }
    }
}

/// Partners carrying their own importer-demand dummy in the copper panel.
const DEMAND_DUMMIES: [(&str, &str); 6] = [
    ("ind", "IND"),
    ("kor", "KOR"),
    ("chl", "CHL"),
    ("chn", "CHN"),
    ("usa", "USA"),
    ("jpn", "JPN"),
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestData {
    pub flows: Vec<TradeFlowRecord>,
    pub indicators: Vec<IndicatorRecord>,
    pub statics: Vec<PairStaticRecord>,
    pub memberships: Vec<MembershipRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assembled {
    pub panel: PanelDataset,
    pub warnings: Vec<IngestWarning>,
}

/// Bilateral real exchange rate proxy (fx_j / fx_i)·(cpi_i / cpi_j), with
/// fx in local currency per USD.
pub fn compute_real_fx(fx_i: f64, fx_j: f64, cpi_i: f64, cpi_j: f64) -> Result<f64, IngestError> {
    for (name, v) in [
        ("fx_i", fx_i),
        ("fx_j", fx_j),
        ("cpi_i", cpi_i),
        ("cpi_j", cpi_j),
    ] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(IngestError::NonPositiveFx(format!("{name} = {v}")));
        }
    }
    Ok((fx_j / fx_i) * (cpi_i / cpi_j))
}

type Series = BTreeMap<Year, f64>;

struct Indicators {
    by_key: BTreeMap<(CountryCode, IndicatorKind), Series>,
    /// CPI divided by its first in-window value.
    cpi_rebased: BTreeMap<CountryCode, Series>,
}

impl Indicators {
    fn new(records: &[IndicatorRecord], window: YearWindow) -> Result<Self, IngestError> {
        let mut by_key: BTreeMap<(CountryCode, IndicatorKind), Series> = BTreeMap::new();
        for r in records {
            let series = by_key.entry((r.country, r.indicator)).or_default();
            if series.insert(r.year, r.value).is_some() {
                return Err(IngestError::DuplicateIndicator {
                    country: r.country,
                    year: r.year,
                    indicator: r.indicator,
                });
            }
        }
        let mut cpi_rebased = BTreeMap::new();
        for ((country, kind), series) in &by_key {
            if *kind != IndicatorKind::CpiIndex {
                continue;
            }
            let base = series
                .range(window.start..=window.end)
                .next()
                .map(|(_, v)| *v);
            if let Some(base) = base {
                let rebased = series.iter().map(|(y, v)| (*y, v / base)).collect();
                cpi_rebased.insert(*country, rebased);
            }
        }
        Ok(Indicators {
            by_key,
            cpi_rebased,
        })
    }

    fn get(&self, country: CountryCode, kind: IndicatorKind, year: Year) -> Option<f64> {
        self.by_key.get(&(country, kind))?.get(&year).copied()
    }

    fn has_country(&self, country: CountryCode) -> bool {
        self.by_key.keys().any(|(c, _)| *c == country)
    }

    fn has_kind(&self, kind: IndicatorKind) -> bool {
        self.by_key.keys().any(|(_, k)| *k == kind)
    }

    fn real_fx(&self, reporter: CountryCode, partner: CountryCode, year: Year) -> Option<f64> {
        let fx_i = self.get(reporter, IndicatorKind::FxRate, year)?;
        let fx_j = self.get(partner, IndicatorKind::FxRate, year)?;
        let cpi_i = *self.cpi_rebased.get(&reporter)?.get(&year)?;
        let cpi_j = *self.cpi_rebased.get(&partner)?.get(&year)?;
        compute_real_fx(fx_i, fx_j, cpi_i, cpi_j).ok()
    }
}

/// Assembles the study panel for reporter Peru.
pub fn assemble_gravity_panel(
    data: &IngestData,
    window: YearWindow,
    variant: Variant,
) -> Result<Assembled, IngestError> {
    let reporter = CountryCode::new(REPORTER).expect("valid code");
    assemble_gravity_panel_for(data, reporter, window, variant)
}

/// Assembles one study panel: entities are (reporter, partner) pairs,
/// rows are partner-years inside `window` with every variable the variant
/// needs. Incomplete rows are left out and reported as warnings.
///
/// Variables: `trade_value`, `gdp_exporter`, `gdp_importer`, `fx`,
/// `distance`, `language`, `border`, plus
/// - GMP: `gnipc_exporter`, `gnipc_importer`, `gdppcdif`, `apec`, `can`, `mercosur`
/// - RTP: `gdppcdif`, `apec`, `can`, `mercosur` (MERCOSUR partners only)
/// - CTP: `ifl`, `ind`, `kor`, `chl`, `chn`, `usa`, `jpn`, `eu`
///
/// Membership dummies switch on once both the partner and the reporter have
/// joined; `eu` depends on the partner alone.
pub fn assemble_gravity_panel_for(
    data: &IngestData,
    reporter: CountryCode,
    window: YearWindow,
    variant: Variant,
) -> Result<Assembled, IngestError> {
    if window.start > window.end {
        return Err(IngestError::Window {
            variant,
            start: window.start,
            end: window.end,
        });
    }
    let ind = Indicators::new(&data.indicators, window)?;
    if !ind.has_country(reporter) {
        return Err(IngestError::MissingReporter(reporter));
    }
    if variant == Variant::Ctp && !ind.has_kind(IndicatorKind::InflationRate) {
        return Err(IngestError::MissingInflation { variant });
    }
    let mut warnings = Vec::new();

    let mut accession: BTreeMap<(Organization, CountryCode), Year> = BTreeMap::new();
    for m in &data.memberships {
        if m.accession_year > window.end {
            warnings.push(IngestWarning::new(
                "accession_after_window",
                format!(
                    "{} {} joins in {}, after {}",
                    m.organization, m.country, m.accession_year, window.end
                ),
            ));
        }
        accession.insert((m.organization, m.country), m.accession_year);
    }
    let member_at = |org: Organization, country: CountryCode, year: Year| {
        accession.get(&(org, country)).is_some_and(|&a| year >= a)
    };
    let dummy = |org: Organization, partner: CountryCode, year: Year| -> f64 {
        let on = match org {
            Organization::Eu => member_at(org, partner, year),
            _ => member_at(org, partner, year) && member_at(org, reporter, year),
        };
        if on {
            1.0
        } else {
            0.0
        }
    };
    let statics: BTreeMap<CountryCode, &PairStaticRecord> =
        data.statics.iter().map(|s| (s.partner, s)).collect();

    let mut foreign = BTreeSet::new();
    let mut flows: BTreeMap<CountryCode, Vec<&TradeFlowRecord>> = BTreeMap::new();
    for f in &data.flows {
        if f.reporter != reporter {
            foreign.insert(f.reporter);
            continue;
        }
        if window.contains(f.year) {
            flows.entry(f.partner).or_default().push(f);
        }
    }
    for r in foreign {
        warnings.push(IngestWarning::new(
            "foreign_reporter",
            format!("flows reported by {r} ignored (reporter is {reporter})"),
        ));
    }

    let mut observations = Vec::new();
    for (partner, partner_flows) in &flows {
        if variant == Variant::Rtp && !accession.contains_key(&(Organization::Mercosur, *partner)) {
            continue;
        }
        if !ind.has_country(*partner) {
            warnings.push(IngestWarning::new(
                "unknown_partner",
                format!("{partner} has no indicator data; partner excluded"),
            ));
            continue;
        }
        let Some(st) = statics.get(partner) else {
            warnings.push(IngestWarning::new(
                "missing_static",
                format!("{partner} has no distance/language/border record; partner excluded"),
            ));
            continue;
        };
        let entity = EntityId::new(reporter, *partner)?;
        for flow in partner_flows {
            let t = flow.year;
            let mut row: Vec<(&'static str, Option<f64>)> = vec![
                ("trade_value", Some(flow.export_value)),
                ("gdp_exporter", ind.get(reporter, IndicatorKind::GdpUsd, t)),
                ("gdp_importer", ind.get(*partner, IndicatorKind::GdpUsd, t)),
                ("fx", ind.real_fx(reporter, *partner, t)),
                ("distance", Some(st.distance_km)),
                ("language", Some(st.common_language as u8 as f64)),
                ("border", Some(st.common_border as u8 as f64)),
            ];
            match variant {
                Variant::Gmp | Variant::Rtp => {
                    if variant == Variant::Gmp {
                        row.push((
                            "gnipc_exporter",
                            ind.get(reporter, IndicatorKind::GnipcUsd, t),
                        ));
                        row.push((
                            "gnipc_importer",
                            ind.get(*partner, IndicatorKind::GnipcUsd, t),
                        ));
                    }
                    let diff = ind
                        .get(reporter, IndicatorKind::GdppcUsd, t)
                        .zip(ind.get(*partner, IndicatorKind::GdppcUsd, t))
                        .map(|(a, b)| (a - b).abs());
                    row.push(("gdppcdif", diff));
                    row.push(("apec", Some(dummy(Organization::Apec, *partner, t))));
                    row.push(("can", Some(dummy(Organization::Can, *partner, t))));
                    row.push(("mercosur", Some(dummy(Organization::Mercosur, *partner, t))));
                }
                Variant::Ctp => {
                    let ifl = ind
                        .get(*partner, IndicatorKind::InflationRate, t)
                        .map(|r| 1.0 + r);
                    row.push(("ifl", ifl));
                    for (name, code) in DEMAND_DUMMIES {
                        let on = partner.as_str() == code;
                        row.push((name, Some(on as u8 as f64)));
                    }
                    row.push(("eu", Some(dummy(Organization::Eu, *partner, t))));
                }
            }
            let missing: Vec<&str> = row
                .iter()
                .filter(|(_, v)| v.is_none())
                .map(|(n, _)| *n)
                .collect();
            if !missing.is_empty() {
                warnings.push(IngestWarning::new(
                    "incomplete_row",
                    format!("{entity} {t} missing {}", missing.join(",")),
                ));
                continue;
            }
            for (name, v) in row {
                observations.push(Observation::new(entity, t, name, v.unwrap()));
            }
        }
    }
    let mut panel = build_panel(observations)?;
    let names: Vec<String> = panel.variable_names().map(str::to_string).collect();
    for name in names {
        let unit = match name.as_str() {
            "trade_value" | "gdp_exporter" | "gdp_importer" | "gnipc_exporter"
            | "gnipc_importer" | "gdppcdif" => Unit::Usd,
            "distance" => Unit::Km,
            "fx" | "ifl" => Unit::Ratio,
            _ => Unit::Dummy,
        };
        panel.set_unit(&name, unit)?;
    }
    Ok(Assembled { panel, warnings })
}
