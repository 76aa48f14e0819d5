use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{EntityId, ModelSpec, PanelDataset, PanelError, Role, Step, Term, Year};

/// Name of the intercept column.
pub const INTERCEPT: &str = "const";

/// Why an entity-year cell did not become a regression row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    Missing(String),
    NonPositive(String),
    LaggedPredecessorMissing,
    Filtered,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::Missing(v) => write!(f, "missing: {v}"),
            DropReason::NonPositive(v) => write!(f, "nonpositive: {v}"),
            DropReason::LaggedPredecessorMissing => f.write_str("lagged predecessor missing"),
            DropReason::Filtered => f.write_str("excluded by sample filter"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowKey {
    pub entity: EntityId,
    pub year: Year,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropRecord {
    pub entity: EntityId,
    pub year: Year,
    pub reason: DropReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub name: String,
    pub time_invariant: bool,
    pub intercept: bool,
    pub role: Role,
}

impl ColumnMeta {
    pub fn continuous(name: &str) -> Self {
        ColumnMeta {
            name: name.to_string(),
            time_invariant: false,
            intercept: false,
            role: Role::Continuous,
        }
    }

    pub fn intercept() -> Self {
        ColumnMeta {
            name: INTERCEPT.to_string(),
            time_invariant: true,
            intercept: true,
            role: Role::Continuous,
        }
    }
}

/// Numeric realization of a model over the retained observations.
///
/// Rows are ordered by entity then year. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    dependent: String,
    y: DVector<f64>,
    x: DMatrix<f64>,
    row_keys: Vec<RowKey>,
    columns: Vec<ColumnMeta>,
    instruments: DMatrix<f64>,
    instrument_names: Vec<String>,
    drop_log: Vec<DropRecord>,
}

impl RegressionProblem {
    /// Assembles a problem from parts, checking shapes. Column time
    /// invariance flags are taken as given.
    pub fn from_parts(
        dependent: &str,
        y: DVector<f64>,
        x: DMatrix<f64>,
        row_keys: Vec<RowKey>,
        columns: Vec<ColumnMeta>,
    ) -> Result<Self, PanelError> {
        let n = y.len();
        if x.nrows() != n || row_keys.len() != n {
            return Err(PanelError::Dimension(format!(
                "y has {n} rows, X has {}, keys {}",
                x.nrows(),
                row_keys.len()
            )));
        }
        if x.ncols() != columns.len() {
            return Err(PanelError::Dimension(format!(
                "X has {} columns, metadata {}",
                x.ncols(),
                columns.len()
            )));
        }
        let mut names = std::collections::HashSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(PanelError::DuplicateColumn(c.name.clone()));
            }
        }
        Ok(RegressionProblem {
            dependent: dependent.to_string(),
            y,
            x,
            row_keys,
            columns,
            instruments: DMatrix::zeros(n, 0),
            instrument_names: Vec::new(),
            drop_log: Vec::new(),
        })
    }

    /// Attaches excluded-instrument columns.
    pub fn with_instruments(
        mut self,
        names: Vec<String>,
        z: DMatrix<f64>,
    ) -> Result<Self, PanelError> {
        if z.nrows() != self.n_obs() || z.ncols() != names.len() {
            return Err(PanelError::Dimension(format!(
                "instrument matrix is {}x{}, expected {}x{}",
                z.nrows(),
                z.ncols(),
                self.n_obs(),
                names.len()
            )));
        }
        self.instruments = z;
        self.instrument_names = names;
        Ok(self)
    }

    pub fn dependent(&self) -> &str {
        &self.dependent
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn row_keys(&self) -> &[RowKey] {
        &self.row_keys
    }

    pub fn columns(&self) -> &[ColumnMeta] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn instruments(&self) -> &DMatrix<f64> {
        &self.instruments
    }

    pub fn instrument_names(&self) -> &[String] {
        &self.instrument_names
    }

    pub fn drop_log(&self) -> &[DropRecord] {
        &self.drop_log
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    /// Row indices per entity, entities ascending.
    pub fn entity_groups(&self) -> Vec<(EntityId, Vec<usize>)> {
        let mut groups: BTreeMap<EntityId, Vec<usize>> = BTreeMap::new();
        for (i, key) in self.row_keys.iter().enumerate() {
            groups.entry(key.entity).or_default().push(i);
        }
        groups.into_iter().collect()
    }

    pub fn n_entities(&self) -> usize {
        self.entity_groups().len()
    }

    /// Same rows and bookkeeping, new numeric content.
    pub(crate) fn replace_data(
        &self,
        y: DVector<f64>,
        x: DMatrix<f64>,
        columns: Vec<ColumnMeta>,
        instruments: DMatrix<f64>,
    ) -> RegressionProblem {
        debug_assert_eq!(x.ncols(), columns.len());
        RegressionProblem {
            dependent: self.dependent.clone(),
            y,
            x,
            row_keys: self.row_keys.clone(),
            columns,
            instruments,
            instrument_names: self.instrument_names.clone(),
            drop_log: self.drop_log.clone(),
        }
    }
}

type CellState = Result<f64, DropReason>;

/// Evaluates a term over every cell of the dataset grid. Cells that cannot
/// be realized carry the reason they would be dropped.
fn realize_term(ds: &PanelDataset, term: &Term) -> Result<Vec<CellState>, PanelError> {
    let grid = ds.variable(&term.variable)?;
    let mut cells: Vec<CellState> = grid
        .cells()
        .map(|c| c.ok_or_else(|| DropReason::Missing(term.variable.clone())))
        .collect();
    for step in &term.transforms {
        cells = match *step {
            Step::Log | Step::Log1p => {
                let shift = if *step == Step::Log1p { 1.0 } else { 0.0 };
                cells
                    .into_iter()
                    .map(|c| match c {
                        Ok(v) if v + shift <= 0.0 => {
                            Err(DropReason::NonPositive(term.variable.clone()))
                        }
                        Ok(v) if shift == 0.0 => Ok(v.ln()),
                        Ok(v) => Ok(v.ln_1p()),
                        Err(r) => Err(r),
                    })
                    .collect()
            }
            Step::Lag(k) => (0..cells.len())
                .map(|idx| {
                    let (entity, year) = ds.key_of(idx);
                    let e = ds.entity_index(&entity).expect("own entity");
                    ds.time_index(year - k as Year)
                        .and_then(|t| cells[ds.cell_index(e, t)].clone().ok())
                        .ok_or(DropReason::LaggedPredecessorMissing)
                })
                .collect(),
        };
    }
    Ok(cells)
}

/// Realizes one term as a new dataset variable named after the term.
pub fn materialize_term(ds: &PanelDataset, term: &Term) -> Result<PanelDataset, PanelError> {
    let cells = realize_term(ds, term)?;
    let unit = match term.role {
        Role::Dummy => super::Unit::Dummy,
        Role::Continuous if term.transforms.is_empty() => ds.variable(&term.variable)?.unit(),
        Role::Continuous => super::Unit::Ratio,
    };
    let mut out = ds.clone();
    out.insert_variable(
        term.name.clone(),
        unit,
        cells.into_iter().map(Result::ok).collect(),
    )?;
    Ok(out)
}

/// Builds the regression problem for `spec` with listwise deletion.
///
/// Columns are the intercept (when requested) followed by regressors in spec
/// order. A row is dropped with the reason of the first failing term,
/// checked in the order dependent, regressors, instruments.
pub fn design_matrix(ds: &PanelDataset, spec: &ModelSpec) -> Result<RegressionProblem, PanelError> {
    spec.validate()?;
    let dep = realize_term(ds, &spec.dependent)?;
    let regs = spec
        .regressors
        .iter()
        .map(|t| realize_term(ds, t))
        .collect::<Result<Vec<_>, _>>()?;
    let insts = spec
        .instruments
        .iter()
        .map(|t| realize_term(ds, t))
        .collect::<Result<Vec<_>, _>>()?;

    let mut kept = Vec::new();
    let mut drop_log = Vec::new();
    'cells: for idx in 0..ds.n_cells() {
        let (entity, year) = ds.key_of(idx);
        if let Some(filter) = &spec.sample_filter {
            if !filter.admits(entity.partner(), year) {
                drop_log.push(DropRecord {
                    entity,
                    year,
                    reason: DropReason::Filtered,
                });
                continue;
            }
        }
        for col in std::iter::once(&dep).chain(&regs).chain(&insts) {
            if let Err(reason) = &col[idx] {
                drop_log.push(DropRecord {
                    entity,
                    year,
                    reason: reason.clone(),
                });
                continue 'cells;
            }
        }
        kept.push(idx);
    }
    if kept.is_empty() {
        return Err(PanelError::NoObservations);
    }

    let n = kept.len();
    let offset = usize::from(spec.include_intercept);
    let k = offset + regs.len();
    let value = |col: &[CellState], idx: usize| *col[idx].as_ref().expect("retained cell");
    let y = DVector::from_iterator(n, kept.iter().map(|&i| value(&dep, i)));
    let mut x = DMatrix::zeros(n, k);
    if spec.include_intercept {
        x.column_mut(0).fill(1.0);
    }
    for (j, col) in regs.iter().enumerate() {
        for (r, &i) in kept.iter().enumerate() {
            x[(r, offset + j)] = value(col, i);
        }
    }
    let mut z = DMatrix::zeros(n, insts.len());
    for (j, col) in insts.iter().enumerate() {
        for (r, &i) in kept.iter().enumerate() {
            z[(r, j)] = value(col, i);
        }
    }
    let row_keys: Vec<RowKey> = kept
        .iter()
        .map(|&i| {
            let (entity, year) = ds.key_of(i);
            RowKey { entity, year }
        })
        .collect();

    let mut columns = Vec::with_capacity(k);
    if spec.include_intercept {
        columns.push(ColumnMeta::intercept());
    }
    for (j, term) in spec.regressors.iter().enumerate() {
        columns.push(ColumnMeta {
            name: term.name.clone(),
            time_invariant: is_time_invariant(&row_keys, x.column(offset + j).as_slice()),
            intercept: false,
            role: term.role,
        });
    }

    let problem = RegressionProblem::from_parts(&spec.dependent.name, y, x, row_keys, columns)?
        .with_instruments(spec.instruments.iter().map(|t| t.name.clone()).collect(), z)?;
    Ok(RegressionProblem {
        drop_log,
        ..problem
    })
}

/// True when the column is constant within every entity.
fn is_time_invariant(keys: &[RowKey], values: &[f64]) -> bool {
    let mut first: BTreeMap<EntityId, f64> = BTreeMap::new();
    keys.iter().zip(values).all(|(key, &v)| {
        let v0 = *first.entry(key.entity).or_insert(v);
        (v - v0).abs() <= 1e-12 * v0.abs().max(1.0)
    })
}
