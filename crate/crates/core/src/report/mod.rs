//! Plain-text, markdown and CSV rendering of unit-root tables, coefficient
//! tables and the Hausman block.

pub mod format;

use serde::Serialize;

use crate::diagnostics::{HausmanComparison, TestFlag, TestResult};
use crate::estimators::EstimationResult;
use crate::unitroot::{FisherResult, IpsResult};
use format::{fixed, percent, significant, stars};

pub const STANDARD_ERROR_NOTE: &str = "Standard errors in parentheses.";
pub const STARS_NOTE: &str =
    "***, **, *: statistically significant at 1%, 5% and 10% levels respectively.";
pub const NOT_PD_WARNING: &str = "(V_b-V_B is not positive definite)";

/// A rectangular table with optional grouped header and footnotes.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Table {
    /// Spanning labels over `header`, same width; empty cells continue the
    /// group to their left.
    pub group_header: Option<Vec<String>>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub footnotes: Vec<String>,
}

impl Table {
    fn width(&self) -> usize {
        self.header.len()
    }

    /// Header cells with group labels folded in, for single-header formats.
    fn flat_header(&self) -> Vec<String> {
        let Some(groups) = &self.group_header else {
            return self.header.clone();
        };
        let mut current = String::new();
        self.header
            .iter()
            .enumerate()
            .map(|(i, h)| {
                if let Some(g) = groups.get(i).filter(|g| !g.is_empty()) {
                    current = g.clone();
                }
                match (current.is_empty(), h.is_empty()) {
                    (true, _) => h.clone(),
                    (false, true) => current.clone(),
                    (false, false) => format!("{current} {h}"),
                }
            })
            .collect()
    }

    /// Tab-separated lines, footnotes after a blank line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(g) = &self.group_header {
            out.push_str(&g.join("\t"));
            out.push('\n');
        }
        out.push_str(&self.header.join("\t"));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join("\t"));
            out.push('\n');
        }
        if !self.footnotes.is_empty() {
            out.push('\n');
            for f in &self.footnotes {
                out.push_str(f);
                out.push('\n');
            }
        }
        out
    }

    /// Pipe-delimited table, footnotes as paragraphs.
    pub fn to_markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|");
        let line = |cells: &[String]| {
            let body: Vec<String> = cells.iter().map(|c| esc(c)).collect();
            format!("| {} |\n", body.join(" | "))
        };
        let mut out = line(&self.flat_header());
        out.push_str(&format!("|{}\n", vec![" --- |"; self.width()].concat()));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        if !self.footnotes.is_empty() {
            out.push('\n');
            for f in &self.footnotes {
                out.push_str(&esc(f));
                out.push_str("\n\n");
            }
            out.pop();
        }
        out
    }

    /// One datum per cell; footnotes are not included.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.flat_header()).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

/// One coefficient row: model column name and its display label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSpec {
    pub name: String,
    pub label: String,
}

impl RowSpec {
    pub fn new(name: &str, label: &str) -> Self {
        RowSpec {
            name: name.to_string(),
            label: label.to_string(),
        }
    }
}

fn coef_cell(r: &EstimationResult, i: usize) -> (String, String) {
    let (b, se) = (r.coefficients[i], r.std_errors[i]);
    let p = crate::diagnostics::normal_two_sided_p(b / se);
    (
        format!("{} ({})", fixed(b, 3), fixed(se, 3)),
        stars(p).to_string(),
    )
}

/// Estimates side by side: one `coef (se)` column plus a stars column per
/// estimator; blank where a method has no such coefficient. Trailing rows
/// give the constant, R², observation count and, when supplied, the Hausman
/// statistic.
pub fn render_coefficient_table(
    results: &[EstimationResult],
    rows: &[RowSpec],
    hausman: Option<&TestResult>,
    dependent_label: Option<&str>,
) -> Table {
    let mut header = vec!["Variables".to_string()];
    for r in results {
        header.push(r.method.heading().to_string());
        header.push(String::new());
    }
    let mut body = Vec::new();
    for spec in rows {
        let mut row = vec![spec.label.clone()];
        for r in results {
            match r.index_of(&spec.name).filter(|&i| !r.columns[i].intercept) {
                Some(i) => {
                    let (c, s) = coef_cell(r, i);
                    row.extend([c, s]);
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        body.push(row);
    }
    let mut constant = vec!["Constant".to_string()];
    for r in results {
        match r.intercept() {
            Some(i) => {
                let (c, s) = coef_cell(r, i);
                constant.extend([c, s]);
            }
            None => constant.extend([String::new(), String::new()]),
        }
    }
    body.push(constant);
    let mut r2 = vec!["R-squared".to_string()];
    let mut n = vec!["Number of observations".to_string()];
    for r in results {
        r2.extend([percent(r.r_squared, 2), String::new()]);
        n.extend([r.n_obs.to_string(), String::new()]);
    }
    body.push(r2);
    body.push(n);
    if let Some(t) = hausman {
        let mut row = vec![
            "Hausman test".to_string(),
            fixed(t.statistic, 2),
            stars(t.p_value).to_string(),
        ];
        row.resize(header.len(), String::new());
        body.push(row);
    }
    let mut footnotes = Vec::new();
    if let Some(d) = dependent_label {
        footnotes.push(format!("Dependent variable: {d}"));
    }
    footnotes.push(STANDARD_ERROR_NOTE.to_string());
    footnotes.push(STARS_NOTE.to_string());
    Table {
        group_header: None,
        header,
        rows: body,
        footnotes,
    }
}

/// Panel unit-root results of one variable.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnitRootRow {
    pub label: String,
    pub ips: Option<IpsResult>,
    pub fisher: Option<FisherResult>,
}

/// Unit-root results of one study.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UnitRootStudy {
    pub name: String,
    pub rows: Vec<UnitRootRow>,
}

fn stat_cell(stat: f64, p: f64) -> String {
    format!("{}({})", fixed(stat, 4), fixed(p, 4))
}

/// IPS and Fisher-ADF columns per study, `stat(p)` cells, rows in first
/// appearance order across studies; blank where a study lacks a variable.
pub fn render_unitroot_table(studies: &[UnitRootStudy]) -> Table {
    let mut labels: Vec<&str> = Vec::new();
    for s in studies {
        for r in &s.rows {
            if !labels.contains(&r.label.as_str()) {
                labels.push(&r.label);
            }
        }
    }
    let mut header = vec!["Variables".to_string()];
    let mut groups = vec![String::new()];
    for s in studies {
        header.extend(["IPS".to_string(), "ADF-fisher".to_string()]);
        groups.extend([s.name.clone(), String::new()]);
    }
    let rows = labels
        .iter()
        .map(|label| {
            let mut row = vec![label.to_string()];
            for s in studies {
                let r = s.rows.iter().find(|r| r.label == *label);
                row.push(
                    r.and_then(|r| r.ips.as_ref())
                        .map(|i| stat_cell(i.w_stat, i.p_value))
                        .unwrap_or_default(),
                );
                row.push(
                    r.and_then(|r| r.fisher.as_ref())
                        .map(|f| stat_cell(f.statistic, f.p_value))
                        .unwrap_or_default(),
                );
            }
            row
        })
        .collect();
    let single_unnamed = studies.len() == 1 && studies[0].name.is_empty();
    Table {
        group_header: (!single_unnamed).then_some(groups),
        header,
        rows,
        footnotes: Vec::new(),
    }
}

fn g7(x: f64) -> String {
    significant(x, 7)
}

/// The four-column coefficient comparison of a Hausman test.
pub fn hausman_table(cmp: &HausmanComparison) -> Table {
    let rows = cmp
        .names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            vec![
                name.clone(),
                g7(cmp.consistent[i]),
                g7(cmp.efficient[i]),
                g7(cmp.difference[i]),
                cmp.se_difference[i]
                    .map(g7)
                    .unwrap_or_else(|| ".".to_string()),
            ]
        })
        .collect();
    Table {
        group_header: Some(
            ["", "(b)", "(B)", "(b-B)", "sqrt(diag(V_b-V_B))"]
                .map(String::from)
                .to_vec(),
        ),
        header: ["", "Fixed effects", "Random effects", "Difference", "S.E."]
            .map(String::from)
            .to_vec(),
        rows,
        footnotes: Vec::new(),
    }
}

/// Lines under the comparison table: legend, statistic, tail probability
/// and, when flagged, the not-positive-definite warning.
pub fn hausman_summary_lines(test: &TestResult) -> Vec<String> {
    let mut lines = vec![
        "b = consistent under Ho and Ha; obtained from fixed effects".to_string(),
        "B = inconsistent under Ha, efficient under Ho; obtained from random effects".to_string(),
        String::new(),
        "Test: Ho: difference in coefficients not systematic".to_string(),
        String::new(),
        format!("χ²({}) = (b-B)'[(V_b-V_B)^(-1)](b-B)", test.df),
        format!("χ²({}) = {}", test.df, fixed(test.statistic, 2)),
        format!("Prob>χ² = {}", fixed(test.p_value, 4)),
    ];
    if test.flags.contains(&TestFlag::NotPositiveDefinite) {
        lines.push(NOT_PD_WARNING.to_string());
    }
    lines
}

/// The complete Hausman block as text.
pub fn render_hausman_block(cmp: &HausmanComparison) -> String {
    let mut out = String::from("Coefficients\n\n");
    out.push_str(&hausman_table(cmp).to_text());
    out.push('\n');
    for l in hausman_summary_lines(&cmp.test) {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Markdown version of [`render_hausman_block`].
pub fn render_hausman_markdown(cmp: &HausmanComparison) -> String {
    let mut out = hausman_table(cmp).to_markdown();
    out.push('\n');
    for l in hausman_summary_lines(&cmp.test) {
        if !l.is_empty() {
            out.push_str(&l);
            out.push_str("\n\n");
        }
    }
    out.pop();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn markdown_and_csv_shapes() {
        let t = Table {
            group_header: Some(vec!["".into(), "GMP".into(), "".into()]),
            header: vec!["Variables".into(), "IPS".into(), "ADF-fisher".into()],
            rows: vec![vec!["FX".into(), "-1.0000(0.1587)".into(), "a|b".into()]],
            footnotes: vec!["note".into()],
        };
        assert_eq!(
            t.to_markdown(),
            "| Variables | GMP IPS | GMP ADF-fisher |\n| --- | --- | --- |\n| FX | -1.0000(0.1587) | a\\|b |\n\nnote\n"
        );
        assert_eq!(
            t.to_csv(),
            "Variables,GMP IPS,GMP ADF-fisher\nFX,-1.0000(0.1587),a|b\n"
        );
        assert!(t
            .to_text()
            .starts_with("\tGMP\t\nVariables\tIPS\tADF-fisher\n"));
    }

    #[test]
    fn zero_difference_summary() {
        let t = TestResult {
            name: "hausman".into(),
            statistic: 0.0,
            df: 3,
            p_value: 1.0,
            flags: BTreeSet::new(),
        };
        let lines = hausman_summary_lines(&t);
        assert!(lines.contains(&"χ²(3) = 0.00".to_string()));
        assert!(lines.contains(&"Prob>χ² = 1.0000".to_string()));
        assert!(!lines.contains(&NOT_PD_WARNING.to_string()));
    }
}
