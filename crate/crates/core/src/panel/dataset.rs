use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EntityId, PanelError, Year};

/// Measurement unit attached to a variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Usd,
    Km,
    #[default]
    Ratio,
    Dummy,
}

/// One raw cell for [`build_panel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub entity: EntityId,
    pub year: Year,
    pub variable: String,
    pub value: f64,
}

impl Observation {
    pub fn new(entity: EntityId, year: Year, variable: impl Into<String>, value: f64) -> Self {
        Observation {
            entity,
            year,
            variable: variable.into(),
            value,
        }
    }
}

/// Values of one variable over the entity × year grid, entity-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableGrid {
    unit: Unit,
    values: Vec<f64>,
    present: Vec<bool>,
}

impl VariableGrid {
    /// Absent cells must carry `None`; present ones a finite value.
    pub(crate) fn from_cells(unit: Unit, cells: Vec<Option<f64>>) -> Self {
        let present = cells.iter().map(Option::is_some).collect();
        let values = cells.into_iter().map(|c| c.unwrap_or(0.0)).collect();
        VariableGrid {
            unit,
            values,
            present,
        }
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn cell(&self, idx: usize) -> Option<f64> {
        if self.present[idx] {
            Some(self.values[idx])
        } else {
            None
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.values
            .iter()
            .zip(&self.present)
            .map(|(&v, &p)| if p { Some(v) } else { None })
    }

    pub fn n_present(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }
}

/// Rectangular entity × year store of named variables.
///
/// Entities and years are kept sorted ascending, so two datasets built from
/// the same observations compare equal regardless of insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    entities: Vec<EntityId>,
    times: Vec<Year>,
    variables: BTreeMap<String, VariableGrid>,
}

/// Builds a dataset from loose observations. Absent cells are masked.
pub fn build_panel<I>(observations: I) -> Result<PanelDataset, PanelError>
where
    I: IntoIterator<Item = Observation>,
{
    let observations: Vec<Observation> = observations.into_iter().collect();
    let entities: Vec<EntityId> = observations
        .iter()
        .map(|o| o.entity)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let times: Vec<Year> = observations
        .iter()
        .map(|o| o.year)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n_cells = entities.len() * times.len();

    let mut grids: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
    for obs in observations {
        if obs.entity.reporter() == obs.entity.partner() {
            return Err(PanelError::SelfPair(obs.entity.reporter()));
        }
        if !obs.value.is_finite() {
            return Err(PanelError::NonFinite {
                entity: obs.entity,
                year: obs.year,
                variable: obs.variable,
            });
        }
        let e = entities.binary_search(&obs.entity).expect("entity indexed");
        let t = times.binary_search(&obs.year).expect("year indexed");
        let grid = grids
            .entry(obs.variable.clone())
            .or_insert_with(|| vec![None; n_cells]);
        let cell = &mut grid[e * times.len() + t];
        if cell.is_some() {
            return Err(PanelError::DuplicateKey {
                entity: obs.entity,
                year: obs.year,
                variable: obs.variable,
            });
        }
        *cell = Some(obs.value);
    }

    Ok(PanelDataset {
        entities,
        times,
        variables: grids
            .into_iter()
            .map(|(name, cells)| (name, VariableGrid::from_cells(Unit::Ratio, cells)))
            .collect(),
    })
}

impl PanelDataset {
    pub fn entities(&self) -> &[EntityId] {
        &self.entities
    }

    pub fn times(&self) -> &[Year] {
        &self.times
    }

    pub fn n_cells(&self) -> usize {
        self.entities.len() * self.times.len()
    }

    pub fn variable_names(&self) -> impl Iterator<Item = &str> {
        self.variables.keys().map(String::as_str)
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variables.contains_key(name)
    }

    pub fn variable(&self, name: &str) -> Result<&VariableGrid, PanelError> {
        self.variables
            .get(name)
            .ok_or_else(|| PanelError::UnknownVariable(name.to_string()))
    }

    pub fn entity_index(&self, entity: &EntityId) -> Option<usize> {
        self.entities.binary_search(entity).ok()
    }

    pub fn time_index(&self, year: Year) -> Option<usize> {
        self.times.binary_search(&year).ok()
    }

    /// Flat cell index for (entity position, year position).
    pub fn cell_index(&self, entity_idx: usize, time_idx: usize) -> usize {
        entity_idx * self.times.len() + time_idx
    }

    pub fn value(&self, variable: &str, entity: &EntityId, year: Year) -> Option<f64> {
        let grid = self.variables.get(variable)?;
        let e = self.entity_index(entity)?;
        let t = self.time_index(year)?;
        grid.cell(self.cell_index(e, t))
    }

    /// Year-ordered cells of one variable for one entity.
    pub fn series(
        &self,
        variable: &str,
        entity_idx: usize,
    ) -> Result<Vec<(Year, Option<f64>)>, PanelError> {
        let grid = self.variable(variable)?;
        Ok(self
            .times
            .iter()
            .enumerate()
            .map(|(t, &year)| (year, grid.cell(self.cell_index(entity_idx, t))))
            .collect())
    }

    /// Adds a variable; `cells` must match the grid shape.
    pub fn insert_variable(
        &mut self,
        name: impl Into<String>,
        unit: Unit,
        cells: Vec<Option<f64>>,
    ) -> Result<(), PanelError> {
        let name = name.into();
        if self.variables.contains_key(&name) {
            return Err(PanelError::VariableExists(name));
        }
        if cells.len() != self.n_cells() {
            return Err(PanelError::Dimension(format!(
                "variable {name:?} has {} cells, grid has {}",
                cells.len(),
                self.n_cells()
            )));
        }
        for (idx, cell) in cells.iter().enumerate() {
            if let Some(v) = cell {
                let (entity, year) = self.key_of(idx);
                if !v.is_finite() {
                    return Err(PanelError::NonFinite {
                        entity,
                        year,
                        variable: name,
                    });
                }
                if unit == Unit::Dummy && *v != 0.0 && *v != 1.0 {
                    return Err(PanelError::NotDummy {
                        entity,
                        year,
                        variable: name,
                        value: *v,
                    });
                }
            }
        }
        self.variables
            .insert(name, VariableGrid::from_cells(unit, cells));
        Ok(())
    }

    /// Re-tags a variable's unit. Tagging as [`Unit::Dummy`] checks that every
    /// present value is 0 or 1.
    pub fn set_unit(&mut self, name: &str, unit: Unit) -> Result<(), PanelError> {
        let grid = self
            .variables
            .get(name)
            .ok_or_else(|| PanelError::UnknownVariable(name.to_string()))?;
        if unit == Unit::Dummy {
            for (idx, cell) in grid.cells().enumerate() {
                if let Some(v) = cell {
                    if v != 0.0 && v != 1.0 {
                        let (entity, year) = self.key_of(idx);
                        return Err(PanelError::NotDummy {
                            entity,
                            year,
                            variable: name.to_string(),
                            value: v,
                        });
                    }
                }
            }
        }
        self.variables.get_mut(name).expect("checked").unit = unit;
        Ok(())
    }

    /// (entity, year) of a flat cell index.
    pub fn key_of(&self, idx: usize) -> (EntityId, Year) {
        let nt = self.times.len();
        (self.entities[idx / nt], self.times[idx % nt])
    }

    /// Long-format dump, sorted by entity, year, variable.
    pub fn to_observations(&self) -> Vec<Observation> {
        let mut out = Vec::new();
        for idx in 0..self.n_cells() {
            let (entity, year) = self.key_of(idx);
            for (name, grid) in &self.variables {
                if let Some(v) = grid.cell(idx) {
                    out.push(Observation::new(entity, year, name.clone(), v));
                }
            }
        }
        out
    }
}
