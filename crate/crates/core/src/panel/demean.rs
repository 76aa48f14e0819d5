use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{EntityId, PanelError, RegressionProblem};

/// Two-pass entity mean of `values` over `rows`.
fn group_mean(rows: &[usize], value: impl Fn(usize) -> f64) -> f64 {
    let n = rows.len() as f64;
    let m = rows.iter().map(|&i| value(i)).sum::<f64>() / n;
    let correction = rows.iter().map(|&i| value(i) - m).sum::<f64>() / n;
    m + correction
}

fn quasi_demean_vector(
    v: &DVector<f64>,
    groups: &[(EntityId, Vec<usize>)],
    weights: &[f64],
) -> DVector<f64> {
    let mut out = v.clone();
    for ((_, rows), &w) in groups.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        let m = group_mean(rows, |i| v[i]);
        for &i in rows {
            out[i] = v[i] - w * m;
        }
    }
    out
}

fn quasi_demean_matrix(
    x: &DMatrix<f64>,
    groups: &[(EntityId, Vec<usize>)],
    weights: &[f64],
) -> DMatrix<f64> {
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        out.set_column(j, &quasi_demean_vector(&col, groups, weights));
    }
    out
}

/// Within transform: subtracts entity means from `y` and every column.
///
/// Columns without within-entity variation (the intercept and anything
/// constant per entity, such as distance) are removed and returned by name.
pub fn demean_within(
    p: &RegressionProblem,
) -> Result<(RegressionProblem, Vec<String>), PanelError> {
    let groups = p.entity_groups();
    if groups.iter().all(|(_, rows)| rows.len() < 2) {
        return Err(PanelError::InsufficientWithin);
    }
    let ones = vec![1.0; groups.len()];
    let xd = quasi_demean_matrix(p.x(), &groups, &ones);

    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..p.n_cols() {
        let within_ss = xd.column(j).norm_squared();
        let total_ss = p.x().column(j).norm_squared();
        if within_ss <= 1e-20 * total_ss {
            dropped.push(p.columns()[j].name.clone());
        } else {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Err(PanelError::NoWithinVariation);
    }
    let x = xd.select_columns(&keep);
    let columns = keep.iter().map(|&j| p.columns()[j].clone()).collect();
    let y = quasi_demean_vector(p.y(), &groups, &ones);
    let z = quasi_demean_matrix(p.instruments(), &groups, &ones);
    Ok((p.replace_data(y, x, columns, z), dropped))
}

/// Partial demeaning: `v_it - lambda_i * mean_i(v)` for `y` and every column,
/// the intercept included.
pub fn quasi_demean(
    p: &RegressionProblem,
    lambda_per_entity: &BTreeMap<EntityId, f64>,
) -> Result<RegressionProblem, PanelError> {
    let groups = p.entity_groups();
    let mut weights = Vec::with_capacity(groups.len());
    for (entity, _) in &groups {
        let w = *lambda_per_entity
            .get(entity)
            .ok_or(PanelError::MissingWeight(*entity))?;
        if !(0.0..=1.0).contains(&w) {
            return Err(PanelError::WeightOutOfRange {
                entity: *entity,
                weight: w,
            });
        }
        weights.push(w);
    }
    let x = quasi_demean_matrix(p.x(), &groups, &weights);
    let y = quasi_demean_vector(p.y(), &groups, &weights);
    let z = quasi_demean_matrix(p.instruments(), &groups, &weights);
    Ok(p.replace_data(y, x, p.columns().to_vec(), z))
}
