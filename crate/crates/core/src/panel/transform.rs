use std::fmt;
use std::str::FromStr;

use super::{CountryCode, PanelDataset, PanelError, Unit, Year};

/// Named 0/1 predicate over (partner, year) cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DummyPredicate {
    /// `partner_in:CHN,USA`
    PartnerIn(Vec<CountryCode>),
    /// `year_ge:2003`
    YearAtLeast(Year),
}

impl DummyPredicate {
    pub fn eval(&self, partner: CountryCode, year: Year) -> bool {
        match self {
            DummyPredicate::PartnerIn(set) => set.contains(&partner),
            DummyPredicate::YearAtLeast(y) => year >= *y,
        }
    }
}

impl FromStr for DummyPredicate {
    type Err = PanelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PanelError::InvalidPredicate(s.to_string());
        let (head, arg) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "partner_in" => {
                let codes = arg
                    .split(',')
                    .map(|c| CountryCode::new(c.trim()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad())?;
                if codes.is_empty() {
                    return Err(bad());
                }
                Ok(DummyPredicate::PartnerIn(codes))
            }
            "year_ge" => arg
                .trim()
                .parse()
                .map(DummyPredicate::YearAtLeast)
                .map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for DummyPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DummyPredicate::PartnerIn(codes) => {
                let list: Vec<&str> = codes.iter().map(CountryCode::as_str).collect();
                write!(f, "partner_in:{}", list.join(","))
            }
            DummyPredicate::YearAtLeast(y) => write!(f, "year_ge:{y}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransformKind {
    Log,
    Log1p,
    Lag(usize),
    AbsDiff,
    Dummy(DummyPredicate),
    Identity,
}

impl TransformKind {
    fn name(&self) -> &'static str {
        match self {
            TransformKind::Log => "log",
            TransformKind::Log1p => "log1p",
            TransformKind::Lag(_) => "lag",
            TransformKind::AbsDiff => "absdiff",
            TransformKind::Dummy(_) => "dummy",
            TransformKind::Identity => "identity",
        }
    }

    fn arity(&self) -> usize {
        match self {
            TransformKind::AbsDiff => 2,
            TransformKind::Dummy(_) => 0,
            _ => 1,
        }
    }
}

/// Derives `target` from `sources` in a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    pub sources: Vec<String>,
    pub target: String,
}

impl TransformSpec {
    pub fn log(source: &str, target: &str) -> Self {
        Self::unary(TransformKind::Log, source, target)
    }

    pub fn log1p(source: &str, target: &str) -> Self {
        Self::unary(TransformKind::Log1p, source, target)
    }

    pub fn lag(source: &str, k: usize, target: &str) -> Self {
        Self::unary(TransformKind::Lag(k), source, target)
    }

    pub fn identity(source: &str, target: &str) -> Self {
        Self::unary(TransformKind::Identity, source, target)
    }

    pub fn absdiff(a: &str, b: &str, target: &str) -> Self {
        TransformSpec {
            kind: TransformKind::AbsDiff,
            sources: vec![a.to_string(), b.to_string()],
            target: target.to_string(),
        }
    }

    pub fn dummy(predicate: DummyPredicate, target: &str) -> Self {
        TransformSpec {
            kind: TransformKind::Dummy(predicate),
            sources: Vec::new(),
            target: target.to_string(),
        }
    }

    fn unary(kind: TransformKind, source: &str, target: &str) -> Self {
        TransformSpec {
            kind,
            sources: vec![source.to_string()],
            target: target.to_string(),
        }
    }
}

/// Returns `dataset` with the transform's target variable added.
///
/// `lag(k)` is aligned on calendar years: the row for year `t` reads the
/// source at `t - k`, and is absent when that year is absent.
pub fn apply_transform(
    mut dataset: PanelDataset,
    t: &TransformSpec,
) -> Result<PanelDataset, PanelError> {
    if t.sources.len() != t.kind.arity() {
        return Err(PanelError::SourceCount {
            kind: t.kind.name(),
            expected: t.kind.arity(),
            got: t.sources.len(),
        });
    }
    let n = dataset.n_cells();
    let (unit, cells): (Unit, Vec<Option<f64>>) = match &t.kind {
        TransformKind::Log | TransformKind::Log1p => {
            let src = &t.sources[0];
            let grid = dataset.variable(src)?;
            let shift = if t.kind == TransformKind::Log1p {
                1.0
            } else {
                0.0
            };
            let mut cells = Vec::with_capacity(n);
            for (idx, cell) in grid.cells().enumerate() {
                cells.push(match cell {
                    Some(v) if v + shift <= 0.0 => {
                        let (entity, year) = dataset.key_of(idx);
                        return Err(PanelError::LogDomain {
                            entity,
                            year,
                            variable: src.clone(),
                            value: v,
                        });
                    }
                    Some(v) if shift == 0.0 => Some(v.ln()),
                    Some(v) => Some(v.ln_1p()),
                    None => None,
                });
            }
            (Unit::Ratio, cells)
        }
        TransformKind::Lag(k) => {
            if *k == 0 {
                return Err(PanelError::ZeroLag);
            }
            let grid = dataset.variable(&t.sources[0])?;
            let cells = (0..n)
                .map(|idx| {
                    let (entity, year) = dataset.key_of(idx);
                    let e = dataset.entity_index(&entity).expect("own entity");
                    let t_prev = dataset.time_index(year - *k as Year)?;
                    grid.cell(dataset.cell_index(e, t_prev))
                })
                .collect();
            (grid.unit(), cells)
        }
        TransformKind::AbsDiff => {
            let a = dataset.variable(&t.sources[0])?;
            let b = dataset.variable(&t.sources[1])?;
            let cells = a
                .cells()
                .zip(b.cells())
                .map(|(x, y)| Some((x? - y?).abs()))
                .collect();
            (a.unit(), cells)
        }
        TransformKind::Dummy(pred) => {
            let cells = (0..n)
                .map(|idx| {
                    let (entity, year) = dataset.key_of(idx);
                    Some(if pred.eval(entity.partner(), year) {
                        1.0
                    } else {
                        0.0
                    })
                })
                .collect();
            (Unit::Dummy, cells)
        }
        TransformKind::Identity => {
            let grid = dataset.variable(&t.sources[0])?;
            (grid.unit(), grid.cells().collect())
        }
    };
    dataset.insert_variable(t.target.clone(), unit, cells)?;
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{build_panel, EntityId, Observation};

    fn eid(p: &str) -> EntityId {
        EntityId::parse("PER", p).unwrap()
    }

    fn inflation_panel() -> PanelDataset {
        let obs = (2006..=2015)
            .map(|y| Observation::new(eid("CHN"), y, "inflation", 0.01 * (y - 2000) as f64))
            .collect::<Vec<_>>();
        build_panel(obs).unwrap()
    }

    #[test]
    fn log_of_one_is_zero() {
        let ds = build_panel(vec![Observation::new(eid("CHN"), 2010, "x", 1.0)]).unwrap();
        let ds = apply_transform(ds, &TransformSpec::log("x", "lnx")).unwrap();
        assert_eq!(ds.value("lnx", &eid("CHN"), 2010), Some(0.0));
    }

    #[test]
    fn log_of_nonpositive_names_cell() {
        let ds = build_panel(vec![Observation::new(eid("CHN"), 2010, "x", 0.0)]).unwrap();
        let err = apply_transform(ds, &TransformSpec::log("x", "lnx")).unwrap_err();
        match err {
            PanelError::LogDomain {
                entity,
                year,
                variable,
                ..
            } => {
                assert_eq!(entity, eid("CHN"));
                assert_eq!(year, 2010);
                assert_eq!(variable, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lag_two_reads_two_years_back() {
        let ds = apply_transform(
            inflation_panel(),
            &TransformSpec::lag("inflation", 2, "ifl_l2"),
        )
        .unwrap();
        let e = eid("CHN");
        assert_eq!(
            ds.value("ifl_l2", &e, 2010),
            ds.value("inflation", &e, 2008)
        );
        assert_eq!(ds.value("ifl_l2", &e, 2006), None);
        assert_eq!(ds.value("ifl_l2", &e, 2007), None);
        assert!(ds.value("ifl_l2", &e, 2008).is_some());
    }

    #[test]
    fn zero_lag_rejected() {
        let err = apply_transform(inflation_panel(), &TransformSpec::lag("inflation", 0, "z"));
        assert_eq!(err.unwrap_err(), PanelError::ZeroLag);
    }

    #[test]
    fn absdiff_is_symmetric() {
        let ds = build_panel(vec![
            Observation::new(eid("CHN"), 2010, "a", 5.0),
            Observation::new(eid("CHN"), 2010, "b", 8.0),
        ])
        .unwrap();
        let ds = apply_transform(ds, &TransformSpec::absdiff("a", "b", "ab")).unwrap();
        let ds = apply_transform(ds, &TransformSpec::absdiff("b", "a", "ba")).unwrap();
        assert_eq!(ds.value("ab", &eid("CHN"), 2010), Some(3.0));
        assert_eq!(ds.value("ba", &eid("CHN"), 2010), Some(3.0));
    }

    #[test]
    fn unknown_source_errors() {
        let err = apply_transform(inflation_panel(), &TransformSpec::log("nope", "z")).unwrap_err();
        assert_eq!(err, PanelError::UnknownVariable("nope".into()));
    }

    #[test]
    fn dummy_predicates() {
        let ds = apply_transform(
            inflation_panel(),
            &TransformSpec::dummy("year_ge:2012".parse().unwrap(), "late"),
        )
        .unwrap();
        assert_eq!(ds.value("late", &eid("CHN"), 2011), Some(0.0));
        assert_eq!(ds.value("late", &eid("CHN"), 2012), Some(1.0));
        assert_eq!(ds.variable("late").unwrap().unit(), Unit::Dummy);
        let p: DummyPredicate = "partner_in:CHN,USA".parse().unwrap();
        assert!(p.eval(CountryCode::new("USA").unwrap(), 2000));
        assert_eq!(p.to_string(), "partner_in:CHN,USA");
        assert!("partner_in:".parse::<DummyPredicate>().is_err());
    }
}
