//! Acceptance suite: one line per criterion, non-zero exit on any failure.
//!
//! Criterion 8 (sign check on user-supplied trade data) depends on data that
//! is not in the repository and is reported as skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use gravpanel_core::config::RunConfig;
use gravpanel_core::diagnostics::{
    chi2_survival, robust_covariance, HausmanComparison, TestFlag, TestResult,
};
use gravpanel_core::estimators::{
    fixed_effects, iv_gmm, ols_solve, pooled_ols, random_effects, random_effects_with,
    variance_components, EstimationResult, GmmSpec, Method,
};
use gravpanel_core::panel::{design_matrix, ColumnMeta, EntityId, RegressionProblem, RowKey};
use gravpanel_core::pipeline::{run_with_config, synthetic_model, GMM_SKIPPED};
use gravpanel_core::report::format::fixed;
use gravpanel_core::report::{
    render_coefficient_table, render_hausman_block, render_unitroot_table, RowSpec, UnitRootRow,
    UnitRootStudy,
};
use gravpanel_core::synth::{
    generate_endogenous_panel, generate_gravity_panel, generate_series_panel, DgpConfig, OUTCOME,
};
use gravpanel_core::unitroot::{
    fisher_combine, panel_unit_root, Deterministics, FisherResult, IpsResult, DEFAULT_LAGS,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_budget(elapsed: Duration, budget: Duration, what: &str) -> Result<(), String> {
    ensure(
        elapsed < budget,
        format!(
            "{what} took {:.2} s, budget {:.0} s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ),
    )
}

// ---- 1 -------------------------------------------------------------------

fn chi2_tails() -> Outcome {
    let start = Instant::now();
    let gmp = chi2_survival(13.68, 6).map_err(|e| e.to_string())?;
    let ctp = chi2_survival(1.6082, 5).map_err(|e| e.to_string())?;
    within_budget(start.elapsed(), Duration::from_secs(1), "chi2 tails")?;
    ensure(
        (0.0330..=0.0340).contains(&gmp),
        format!("chi2(6) tail at 13.68 = {gmp}"),
    )?;
    ensure(
        (0.8998..=0.9008).contains(&ctp),
        format!("chi2(5) tail at 1.6082 = {ctp}"),
    )?;
    Ok(format!(
        "P(chi2_6 > 13.68) = {gmp:.4}, P(chi2_5 > 1.6082) = {ctp:.4}"
    ))
}

// ---- 2 -------------------------------------------------------------------

/// (name, b, B, printed b-B, printed se), as printed in the GMP Hausman block.
const GMP_HAUSMAN: [(&str, f64, f64, &str, f64); 6] = [
    ("lngdp", 0.5978124, 1.053708, "-0.455896", 0.2731703),
    ("lnprgdp", 2.08268, 1.778324, "0.304356", 0.1426165),
    ("lngdppcdiff", -0.0973337, -0.0963037, "-0.00103", 0.0139143),
    ("lnfx", -0.0647418, -0.0829712, "0.0182294", 0.0329075),
    ("lngnipc", -0.2056755, -0.20844, "0.0027645", 0.2971402),
    ("lnprgnipc", -1.597462, -1.530646, "-0.066816", 0.1368091),
];

fn hausman_fixture() -> Outcome {
    let start = Instant::now();
    let stat = 13.68;
    let test = TestResult {
        name: "hausman".into(),
        statistic: stat,
        df: 6,
        p_value: chi2_survival(stat, 6).map_err(|e| e.to_string())?,
        flags: BTreeSet::from([TestFlag::NotPositiveDefinite]),
    };
    let cmp = HausmanComparison::from_coefficients(
        GMP_HAUSMAN.iter().map(|r| r.0.to_string()).collect(),
        GMP_HAUSMAN.iter().map(|r| r.1).collect(),
        GMP_HAUSMAN.iter().map(|r| r.2).collect(),
        GMP_HAUSMAN.iter().map(|r| Some(r.4)).collect(),
        test,
    )
    .map_err(|e| e.to_string())?;
    let block = render_hausman_block(&cmp);
    within_budget(start.elapsed(), Duration::from_secs(1), "Hausman fixture")?;
    for (name, _, _, printed, _) in GMP_HAUSMAN {
        let row = block
            .lines()
            .find(|l| l.split('\t').next() == Some(name))
            .ok_or_else(|| format!("no row for {name}"))?;
        let cell = row.split('\t').nth(3).unwrap_or_default();
        let value: f64 = cell
            .parse()
            .map_err(|_| format!("{name}: b-B cell {cell:?}"))?;
        let decimals = printed.split('.').nth(1).map_or(0, str::len);
        let at_printed = fixed(value, decimals);
        ensure(
            at_printed == printed,
            format!("{name}: b-B rendered {cell} -> {at_printed}, printed {printed}"),
        )?;
    }
    let prob = format!("Prob>χ² = {}", fixed(cmp.test.p_value, 4));
    for line in [
        "(V_b-V_B is not positive definite)",
        "χ²(6) = 13.68",
        prob.as_str(),
        "Test: Ho: difference in coefficients not systematic",
    ] {
        ensure(
            block.lines().any(|l| l == line),
            format!("missing line {line:?}"),
        )?;
    }
    Ok("6/6 b-B cells match the printed column at printed precision; warning line present".into())
}

// ---- 3 -------------------------------------------------------------------

/// Least squares with one dummy per entity and no intercept.
fn lsdv(p: &RegressionProblem) -> (Vec<f64>, Vec<f64>) {
    let groups = p.entity_groups();
    let slopes: Vec<usize> = (0..p.n_cols())
        .filter(|&j| !p.columns()[j].intercept)
        .collect();
    let n = p.n_obs();
    let k = slopes.len() + groups.len();
    let mut x = DMatrix::zeros(n, k);
    for (c, &j) in slopes.iter().enumerate() {
        x.set_column(c, &p.x().column(j));
    }
    for (g, (_, rows)) in groups.iter().enumerate() {
        for &r in rows {
            x[(r, slopes.len() + g)] = 1.0;
        }
    }
    let sol = ols_solve(&x, p.y()).expect("LSDV design has full rank");
    let se = (0..slopes.len())
        .map(|c| sol.covariance[(c, c)].sqrt())
        .collect();
    (
        sol.coefficients
            .rows(0, slopes.len())
            .iter()
            .copied()
            .collect(),
        se,
    )
}

fn oracle_equivalences() -> Outcome {
    let budget = Duration::from_secs(5);

    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let dgp = DgpConfig {
            n_entities: 8 + (seed as usize % 5) * 3,
            n_periods: 5 + seed as usize % 4,
            effect_correlation: 0.5,
            seed: 1000 + seed,
            ..DgpConfig::default()
        };
        let (ds, _) = generate_gravity_panel(&dgp).map_err(|e| e.to_string())?;
        let p = design_matrix(&ds, &synthetic_model(&dgp, false)).map_err(|e| e.to_string())?;
        let fe = fixed_effects(&p).map_err(|e| e.to_string())?;
        let (b, se) = lsdv(&p);
        for (j, name) in ["x1", "x2"].iter().enumerate() {
            let d = (fe.coef(name).unwrap() - b[j]).abs();
            let s = (fe.se(name).unwrap() - se[j]).abs();
            worst = worst.max(d).max(s);
        }
    }
    within_budget(start.elapsed(), budget, "within vs LSDV")?;
    ensure(
        worst <= 1e-8,
        format!("within vs LSDV max deviation {worst:e}"),
    )?;

    let start = Instant::now();
    let dgp = DgpConfig {
        n_entities: 40,
        seed: 7,
        ..DgpConfig::default()
    };
    let (ds, _) = generate_gravity_panel(&dgp).map_err(|e| e.to_string())?;
    let p = design_matrix(&ds, &synthetic_model(&dgp, false)).map_err(|e| e.to_string())?;
    let ols = pooled_ols(&p).map_err(|e| e.to_string())?;
    let gmm = iv_gmm(&p, &GmmSpec::default()).map_err(|e| e.to_string())?;
    let gmm_dev = ols
        .coefficients
        .iter()
        .zip(&gmm.coefficients)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    within_budget(start.elapsed(), budget, "GMM with Z = X")?;
    ensure(
        gmm_dev <= 1e-8,
        format!("GMM(Z = X) vs OLS deviation {gmm_dev:e}"),
    )?;

    let start = Instant::now();
    let mut clamped = None;
    for seed in 0..200u64 {
        let dgp = DgpConfig {
            sigma_entity: 0.0,
            n_entities: 15,
            n_periods: 4,
            seed,
            ..DgpConfig::default()
        };
        let (ds, _) = generate_gravity_panel(&dgp).map_err(|e| e.to_string())?;
        let p = design_matrix(&ds, &synthetic_model(&dgp, false)).map_err(|e| e.to_string())?;
        let vc = variance_components(&p).map_err(|e| e.to_string())?;
        if vc.clamped {
            clamped = Some((seed, p, vc));
            break;
        }
    }
    let (seed, p, vc) = clamped.ok_or("no seed with a clamped entity variance")?;
    ensure(vc.sigma2_entity == 0.0, "clamped variance is not zero")?;
    let re = random_effects_with(&p, &vc).map_err(|e| e.to_string())?;
    let re_direct = random_effects(&p).map_err(|e| e.to_string())?;
    let ols = pooled_ols(&p).map_err(|e| e.to_string())?;
    let re_dev = re
        .coefficients
        .iter()
        .zip(&ols.coefficients)
        .chain(re.std_errors.iter().zip(&ols.std_errors))
        .chain(re_direct.coefficients.iter().zip(&ols.coefficients))
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    within_budget(start.elapsed(), budget, "clamped RE")?;
    ensure(
        re_dev <= 1e-12,
        format!("clamped RE vs OLS deviation {re_dev:e} (seed {seed})"),
    )?;

    let start = Instant::now();
    let a = EntityId::parse("PER", "AAA").unwrap();
    let b = EntityId::parse("PER", "BBB").unwrap();
    let keys = vec![
        RowKey {
            entity: a,
            year: 2000,
        },
        RowKey {
            entity: a,
            year: 2001,
        },
        RowKey {
            entity: b,
            year: 2000,
        },
        RowKey {
            entity: b,
            year: 2001,
        },
    ];
    let toy = RegressionProblem::from_parts(
        "y",
        DVector::from_row_slice(&[1.0, 3.0, 2.0, 6.0]),
        DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 2.0, 1.0, 4.0, 1.0, 6.0]),
        keys,
        vec![ColumnMeta::intercept(), ColumnMeta::continuous("x")],
    )
    .map_err(|e| e.to_string())?;
    let slope = fixed_effects(&toy)
        .map_err(|e| e.to_string())?
        .coef("x")
        .unwrap();
    within_budget(start.elapsed(), budget, "toy FE")?;
    ensure(
        (slope - 2.0).abs() <= 1e-12,
        format!("toy FE slope {slope}"),
    )?;

    Ok(format!(
        "within-LSDV {worst:.1e}, GMM(Z=X)-OLS {gmm_dev:.1e}, clamped RE-OLS {re_dev:.1e}, toy slope {slope}"
    ))
}

// ---- 4 -------------------------------------------------------------------

const SEEDS: u64 = 500;

fn covers(r: &EstimationResult, truth: &BTreeMap<String, f64>, width: f64) -> Vec<(String, bool)> {
    r.names()
        .map(|n| {
            let ok = (r.coef(n).unwrap() - truth[n]).abs() <= width * r.se(n).unwrap();
            (n.to_string(), ok)
        })
        .collect()
}

fn rate(hits: usize) -> f64 {
    hits as f64 / SEEDS as f64
}

fn monte_carlo_estimators() -> Outcome {
    let start = Instant::now();

    let mut ols_hits: BTreeMap<String, usize> = BTreeMap::new();
    for seed in 0..SEEDS {
        let dgp = DgpConfig {
            n_entities: 200,
            n_periods: 10,
            sigma_entity: 0.0,
            seed: 10_000 + seed,
            ..DgpConfig::default()
        };
        let (ds, truth) = generate_gravity_panel(&dgp).map_err(|e| e.to_string())?;
        let p = design_matrix(&ds, &synthetic_model(&dgp, false)).map_err(|e| e.to_string())?;
        let r = pooled_ols(&p).map_err(|e| e.to_string())?;
        for (n, ok) in covers(&r, &truth, 3.0) {
            *ols_hits.entry(n).or_default() += usize::from(ok);
        }
    }
    let ols_min = ols_hits.values().map(|&h| rate(h)).fold(1.0, f64::min);

    let mut re_hits: BTreeMap<String, usize> = BTreeMap::new();
    for seed in 0..SEEDS {
        let dgp = DgpConfig {
            n_entities: 100,
            n_periods: 10,
            sigma_entity: 1.0,
            effect_correlation: 0.0,
            seed: 20_000 + seed,
            ..DgpConfig::default()
        };
        let (ds, truth) = generate_gravity_panel(&dgp).map_err(|e| e.to_string())?;
        let p = design_matrix(&ds, &synthetic_model(&dgp, false)).map_err(|e| e.to_string())?;
        let r = random_effects(&p).map_err(|e| e.to_string())?;
        for (n, ok) in covers(&r, &truth, 3.0) {
            *re_hits.entry(n).or_default() += usize::from(ok);
        }
    }
    let re_min = re_hits.values().map(|&h| rate(h)).fold(1.0, f64::min);

    let spec = GmmSpec {
        endogenous: vec!["x1".into()],
        instruments: vec!["z1".into(), "z2".into()],
        ..GmmSpec::default()
    };
    let mut endo_hits = 0;
    let mut j_rejections = 0;
    for seed in 0..SEEDS {
        let dgp = DgpConfig {
            n_entities: 100,
            n_periods: 10,
            sigma_entity: 0.0,
            endogeneity_rho: 0.6,
            instrument_strength: 0.8,
            seed: 30_000 + seed,
            ..DgpConfig::default()
        };
        let (ds, truth) = generate_endogenous_panel(&dgp).map_err(|e| e.to_string())?;
        let p = design_matrix(&ds, &synthetic_model(&dgp, true)).map_err(|e| e.to_string())?;
        let ols = pooled_ols(&p).map_err(|e| e.to_string())?;
        let j = p.column_index("x1").unwrap();
        let v = robust_covariance(p.x(), &ols.residuals, true).map_err(|e| e.to_string())?;
        let ols_bias = (ols.coefficients[j] - truth["x1"]).abs() / v[(j, j)].sqrt();
        let gmm = iv_gmm(&p, &spec).map_err(|e| e.to_string())?;
        let gmm_ok = (gmm.coef("x1").unwrap() - truth["x1"]).abs() <= 3.0 * gmm.se("x1").unwrap();
        endo_hits += usize::from(ols_bias > 5.0 && gmm_ok);

        let invalid = DgpConfig {
            invalid_instrument: 0.3,
            seed: 40_000 + seed,
            ..dgp
        };
        let (ds, _) = generate_endogenous_panel(&invalid).map_err(|e| e.to_string())?;
        let p = design_matrix(&ds, &synthetic_model(&invalid, true)).map_err(|e| e.to_string())?;
        let g = iv_gmm(&p, &spec).map_err(|e| e.to_string())?;
        j_rejections += usize::from(g.extras["hansen_j_p"] < 0.05);
    }
    within_budget(
        start.elapsed(),
        Duration::from_secs(300),
        "estimator Monte Carlo",
    )?;
    let detail = format!(
        "OLS coverage min {:.1}%, RE coverage min {:.1}%, OLS-biased & GMM-covering {:.1}%, Hansen J power {:.1}%, {:.1} s",
        100.0 * ols_min,
        100.0 * re_min,
        100.0 * rate(endo_hits),
        100.0 * rate(j_rejections),
        start.elapsed().as_secs_f64()
    );
    ensure(ols_min >= 0.99, format!("pooled OLS coverage: {detail}"))?;
    ensure(re_min >= 0.99, format!("RE coverage: {detail}"))?;
    ensure(rate(endo_hits) >= 0.95, format!("endogenous DGP: {detail}"))?;
    ensure(rate(j_rejections) >= 0.80, format!("Hansen J: {detail}"))?;
    Ok(detail)
}

// ---- 5 -------------------------------------------------------------------

fn unit_root_calibration() -> Outcome {
    let start = Instant::now();
    let mut size = (0, 0);
    let mut power = (0, 0);
    for seed in 0..SEEDS {
        for (unit_root, tally) in [(true, &mut size), (false, &mut power)] {
            let ds = generate_series_panel(20, 50, unit_root, 50_000 + seed)
                .map_err(|e| e.to_string())?;
            let (ips, fisher) =
                panel_unit_root(&ds, OUTCOME, DEFAULT_LAGS, Deterministics::Constant)
                    .map_err(|e| e.to_string())?;
            tally.0 += usize::from(ips.p_value < 0.05);
            tally.1 += usize::from(fisher.p_value < 0.05);
        }
    }
    let elapsed = start.elapsed();
    let (s_ips, s_f, p_ips, p_f) = (rate(size.0), rate(size.1), rate(power.0), rate(power.1));

    let (stat, df, p) = fisher_combine(&[0.5, 0.5]);
    let a = [0.013, 0.42, 0.9991, 0.25, 0.5];
    let b = [3.3e-5, 0.077, 0.61];
    let all: Vec<f64> = a.iter().chain(&b).copied().collect();
    let additive = fisher_combine(&all).0 == fisher_combine(&a).0 + fisher_combine(&b).0;

    let detail = format!(
        "size IPS {:.1}% Fisher {:.1}%, power IPS {:.1}% Fisher {:.1}%, Fisher(0.5, 0.5) = {stat:.4} p {p:.4}, {:.1} s",
        100.0 * s_ips,
        100.0 * s_f,
        100.0 * p_ips,
        100.0 * p_f,
        elapsed.as_secs_f64()
    );
    within_budget(elapsed, Duration::from_secs(300), "unit-root Monte Carlo")?;
    for (name, r) in [("IPS", s_ips), ("Fisher", s_f)] {
        ensure((0.02..=0.08).contains(&r), format!("{name} size: {detail}"))?;
    }
    for (name, r) in [("IPS", p_ips), ("Fisher", p_f)] {
        ensure(r >= 0.95, format!("{name} power: {detail}"))?;
    }
    ensure(
        additive,
        "Fisher statistic is not additive over disjoint sets",
    )?;
    ensure(
        df == 4 && (stat - 2.7726).abs() < 1e-4,
        format!("Fisher(0.5, 0.5) = {stat}, df {df}"),
    )?;
    ensure(
        (p - 0.5966).abs() < 1e-4,
        format!("Fisher(0.5, 0.5) p = {p}"),
    )?;
    Ok(detail)
}

// ---- 6 -------------------------------------------------------------------

fn hausman_p_from_log(log: &str) -> Option<f64> {
    log.lines()
        .find(|l| l.contains("Hausman chi2("))?
        .rsplit("p = ")
        .next()?
        .trim()
        .parse()
        .ok()
}

fn branch_run(dir: &Path, effect_correlation: f64) -> Result<(f64, bool, bool), String> {
    let text = format!(
        "[run]\nvariant = \"synthetic\"\nout_dir = {:?}\n\n[synthetic]\nn_entities = 40\neffect_correlation = {effect_correlation}\nseed = 11\n",
        dir.display().to_string()
    );
    let cfg = RunConfig::from_toml(&text).map_err(|e| e.to_string())?;
    run_with_config(&cfg).map_err(|e| e.to_string())?;
    // From here on only the files are consulted.
    let log = fs::read_to_string(dir.join("run.log")).map_err(|e| e.to_string())?;
    let p = hausman_p_from_log(&log).ok_or("run.log has no Hausman p-value")?;
    let gmm_files = dir.join("gmm.md").exists() || dir.join("gmm.csv").exists();
    Ok((p, gmm_files, log.contains(GMM_SKIPPED)))
}

fn pipeline_branches() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (p_reject, gmm_reject, skipped_reject) = branch_run(&tmp.path().join("reject"), 0.8)?;
    let (p_keep, gmm_keep, skipped_keep) = branch_run(&tmp.path().join("keep"), 0.0)?;
    ensure(
        p_reject < 0.05,
        format!("correlated effects gave Hausman p = {p_reject}"),
    )?;
    ensure(
        gmm_reject && !skipped_reject,
        "rejecting run has no GMM artifact",
    )?;
    ensure(
        p_keep >= 0.05,
        format!("uncorrelated effects gave Hausman p = {p_keep}"),
    )?;
    ensure(
        !gmm_keep && skipped_keep,
        "non-rejecting run wrote a GMM artifact or no skip line",
    )?;
    Ok(format!(
        "p = {p_reject:.2e} -> gmm.* written; p = {p_keep:.4} -> gmm.* absent, skip logged"
    ))
}

// ---- 7 -------------------------------------------------------------------

fn result(
    method: Method,
    cols: &[(&str, bool)],
    coef: &[f64],
    se: &[f64],
    r2: f64,
    n: usize,
) -> EstimationResult {
    let k = cols.len();
    EstimationResult {
        method,
        columns: cols
            .iter()
            .map(|&(name, ti)| {
                if name == "const" {
                    ColumnMeta::intercept()
                } else {
                    ColumnMeta {
                        time_invariant: ti,
                        ..ColumnMeta::continuous(name)
                    }
                }
            })
            .collect(),
        coefficients: coef.to_vec(),
        std_errors: se.to_vec(),
        covariance: DMatrix::from_diagonal(&DVector::from_iterator(k, se.iter().map(|s| s * s))),
        residuals: DVector::zeros(0),
        n_obs: n,
        df_resid: n - k,
        r_squared: r2,
        extras: BTreeMap::new(),
        flags: BTreeSet::new(),
        dropped_columns: Vec::new(),
    }
}

fn render_goldens() -> Outcome {
    let fe = result(
        Method::FixedEffects,
        &[("lngdp", false)],
        &[0.597],
        &[0.292],
        0.4526,
        1080,
    );
    let re = result(
        Method::RandomEffects,
        &[("const", true), ("lngdp", false), ("lndistance", true)],
        &[-22.439, 1.053, -2.005],
        &[9.848, 0.102, 0.395],
        0.6977,
        1080,
    );
    let gmm = result(
        Method::IvGmm,
        &[("lngdp", false), ("lndistance", true)],
        &[1.169, -2.376],
        &[0.092, 0.359],
        0.7028,
        1080,
    );
    let rows = [
        RowSpec::new("lngdp", "Importer's GDP"),
        RowSpec::new("lndistance", "Distance"),
    ];
    let render = || {
        render_coefficient_table(
            &[fe.clone(), re.clone(), gmm.clone()],
            &rows,
            None,
            Some("Exports"),
        )
        .to_text()
    };
    let coef_text = render();
    let distance = coef_text
        .lines()
        .find(|l| l.starts_with("Distance\t"))
        .ok_or("no Distance row")?;
    ensure(
        distance == "Distance\t\t\t-2.005 (0.395)\t***\t-2.376 (0.359)\t***",
        format!("Distance row {distance:?}"),
    )?;
    ensure(
        distance.contains("-2.376 (0.359)\t***"),
        "GMM distance cell",
    )?;
    let r2 = coef_text
        .lines()
        .find(|l| l.starts_with("R-squared"))
        .ok_or("no R-squared row")?;
    ensure(
        r2.split('\t').nth(3) == Some("69.77%"),
        format!("R-squared row {r2:?}"),
    )?;

    let ips = IpsResult {
        variable: "gdp_importer".into(),
        t_bar: -3.0,
        w_stat: -13.4069,
        n_series: 108,
        p_value: 0.00001,
        per_series: Vec::new(),
        excluded: Vec::new(),
    };
    let fisher = FisherResult {
        variable: "gdp_importer".into(),
        statistic: 719.024,
        df: 216,
        p_value: 0.00001,
        per_series: Vec::new(),
        excluded: Vec::new(),
    };
    let studies = [UnitRootStudy {
        name: "GMP".into(),
        rows: vec![UnitRootRow {
            label: "GDP of importer".into(),
            ips: Some(ips),
            fisher: Some(fisher),
        }],
    }];
    let ur_text = render_unitroot_table(&studies).to_text();
    ensure(
        ur_text
            .lines()
            .any(|l| l == "GDP of importer\t-13.4069(0.0000)\t719.0240(0.0000)"),
        format!("unit-root table {ur_text:?}"),
    )?;

    let twice = render() == coef_text && render_unitroot_table(&studies).to_text() == ur_text;
    ensure(twice, "second rendering differs")?;

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut bodies = Vec::new();
    for run in ["a", "b"] {
        let dir = tmp.path().join(run);
        let text = format!(
            "[run]\nvariant = \"synthetic\"\nout_dir = {:?}\n[synthetic]\neffect_correlation = 0.8\n",
            dir.display().to_string()
        );
        let cfg = RunConfig::from_toml(&text).map_err(|e| e.to_string())?;
        run_with_config(&cfg).map_err(|e| e.to_string())?;
        let mut files = BTreeMap::new();
        for f in [
            "unitroot.md",
            "estimates.md",
            "hausman.md",
            "gmm.md",
            "estimates.csv",
            "results.json",
        ] {
            files.insert(f, fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"))?);
        }
        bodies.push(files);
    }
    ensure(
        bodies[0] == bodies[1],
        "pipeline artifacts differ between identical runs",
    )?;
    Ok(
        "coefficient, R-squared and unit-root cells match; renders and artifacts byte-stable"
            .into(),
    )
}

fn main() {
    let criteria: [(u8, &str, fn() -> Outcome); 7] = [
        (1, "chi-square tails", chi2_tails),
        (2, "Hausman fixture", hausman_fixture),
        (3, "estimator oracle equivalences", oracle_equivalences),
        (
            4,
            "estimator Monte Carlo calibration",
            monte_carlo_estimators,
        ),
        (5, "unit-root calibration", unit_root_calibration),
        (6, "pipeline branch behavior", pipeline_branches),
        (7, "rendering goldens", render_goldens),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {id} PASS {name}: {detail} [{secs:.2} s]"),
            Err(why) => {
                failed += 1;
                println!("criterion {id} FAIL {name}: {why} [{secs:.2} s]");
            }
        }
    }
    println!(
        "criterion 8 SKIP sign check on real trade data: environment-dependent, not run in CI"
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
