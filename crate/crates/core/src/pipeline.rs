//! End-to-end run: data, unit-root pretests, FE and RE, Hausman, and IV-GMM
//! when the Hausman test rejects.
//!
//! Artifacts written to the output directory:
//! `unitroot.{md,csv}`, `estimates.{md,csv}`, `hausman.{md,csv}`,
//! `gmm.{md,csv}` (only when GMM ran), `results.json` and `run.log`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, LogLevel, OutputFormat, RunConfig, RunVariant};
use crate::diagnostics::{hausman_comparison, HausmanComparison, TestFlag};
use crate::estimators::{fixed_effects, iv_gmm, random_effects, EstimationResult, GmmSpec};
use crate::ingest::{
    assemble_gravity_panel_for, default_gmm_spec, default_model_spec, read_indicator_file,
    read_membership_file, read_pair_static_file, read_trade_file, IngestData, REPORTER,
};
use crate::panel::{
    design_matrix, materialize_term, CountryCode, ModelSpec, PanelDataset, Role, Term,
};
use crate::report::{
    hausman_summary_lines, hausman_table, render_coefficient_table, render_hausman_block,
    render_hausman_markdown, render_unitroot_table, RowSpec, Table, UnitRootRow, UnitRootStudy,
};
use crate::synth::{
    generate_endogenous_panel, generate_gravity_panel, DgpConfig, INSTRUMENTS, OUTCOME,
};
use crate::unitroot::panel_unit_root;

/// Log line emitted when the GMM stage is not run.
pub const GMM_SKIPPED: &str = "GMM skipped: Hausman failed to reject";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailureKind {
    Config,
    Data,
    Numerical,
    Output,
}

impl FailureKind {
    pub fn exit_code(&self) -> i32 {
        match self {
            FailureKind::Config => 2,
            FailureKind::Data => 3,
            FailureKind::Numerical => 4,
            FailureKind::Output => 1,
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            FailureKind::Config => "config",
            FailureKind::Data => "data",
            FailureKind::Numerical => "numerical",
            FailureKind::Output => "output",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineError {
    pub kind: FailureKind,
    pub stage: &'static str,
    pub message: String,
}

impl PipelineError {
    pub fn new(kind: FailureKind, stage: &'static str, message: impl fmt::Display) -> Self {
        PipelineError {
            kind,
            stage,
            message: message.to_string().replace('\n', " "),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind.exit_code()
    }

    /// Single-line summary: `error kind=<kind> exit=<code> stage=<stage> message="…"`.
    pub fn summary(&self) -> String {
        format!(
            "error kind={} exit={} stage={} message={:?}",
            self.kind.tag(),
            self.exit_code(),
            self.stage,
            self.message
        )
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.summary())
    }
}

impl std::error::Error for PipelineError {}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        PipelineError::new(FailureKind::Config, "config", e)
    }
}

fn data_err(stage: &'static str) -> impl Fn(String) -> PipelineError {
    move |m| PipelineError::new(FailureKind::Data, stage, m)
}

fn numerical_err(stage: &'static str) -> impl Fn(String) -> PipelineError {
    move |m| PipelineError::new(FailureKind::Numerical, stage, m)
}

fn output_err(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::new(
        FailureKind::Output,
        "output",
        format!("{}: {e}", path.display()),
    )
}

/// Leveled log lines, kept in order and written to `run.log`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunLog {
    pub level: LogLevel,
    pub lines: Vec<String>,
}

impl RunLog {
    pub fn new(level: LogLevel) -> Self {
        RunLog {
            level,
            lines: Vec::new(),
        }
    }

    pub fn log(&mut self, level: LogLevel, message: impl fmt::Display) {
        if level <= self.level {
            self.lines.push(format!("{level} {message}"));
        }
    }

    pub fn info(&mut self, message: impl fmt::Display) {
        self.log(LogLevel::Info, message);
    }

    pub fn warn(&mut self, message: impl fmt::Display) {
        self.log(LogLevel::Warn, message);
    }

    pub fn debug(&mut self, message: impl fmt::Display) {
        self.log(LogLevel::Debug, message);
    }

    pub fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// A panel ready for estimation, with its model and instrumentation.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub panel: PanelDataset,
    pub model: ModelSpec,
    pub gmm: GmmSpec,
    /// Label of the unit-root study column.
    pub study: String,
    pub dependent_label: String,
}

/// Model of a synthetic panel: outcome on every generated regressor, with
/// the generated instruments when the panel has them.
pub fn synthetic_model(dgp: &DgpConfig, with_instruments: bool) -> ModelSpec {
    let regressors = dgp
        .regressors()
        .into_iter()
        .map(|n| {
            if dgp.dummies.contains(n) {
                Term::dummy(n, n)
            } else {
                Term::new(n, n, &[])
            }
        })
        .collect();
    let mut spec = ModelSpec::new(Term::new(OUTCOME, OUTCOME, &[]), regressors);
    spec.include_intercept = true;
    if with_instruments {
        spec.instruments = INSTRUMENTS.iter().map(|z| Term::new(z, z, &[])).collect();
    }
    spec
}

fn has_instrumented_regressor(dgp: &DgpConfig) -> bool {
    dgp.regressors().contains(&dgp.endogenous.as_str())
        && !dgp.time_invariant.contains(&dgp.endogenous)
        && !dgp.dummies.contains(&dgp.endogenous)
        && !dgp.unit_root.contains(&dgp.endogenous)
}

/// Synthetic panel, model and instrumentation for `dgp`.
pub fn prepare_synthetic(dgp: &DgpConfig, log: &mut RunLog) -> Result<PreparedData, PipelineError> {
    let instrumented = has_instrumented_regressor(dgp);
    let (panel, _) = if instrumented {
        generate_endogenous_panel(dgp)
    } else {
        generate_gravity_panel(dgp)
    }
    .map_err(|e| PipelineError::new(FailureKind::Config, "synthetic", e))?;
    log.info(format!(
        "synthetic panel: {} entities x {} periods, seed {}",
        panel.entities().len(),
        panel.times().len(),
        dgp.seed
    ));
    let gmm = if instrumented {
        GmmSpec {
            endogenous: vec![dgp.endogenous.clone()],
            instruments: INSTRUMENTS.iter().map(|s| s.to_string()).collect(),
            ..GmmSpec::default()
        }
    } else {
        GmmSpec::default()
    };
    Ok(PreparedData {
        panel,
        model: synthetic_model(dgp, instrumented),
        gmm,
        study: "synthetic".into(),
        dependent_label: OUTCOME.into(),
    })
}

fn read_inputs(cfg: &RunConfig) -> Result<IngestData, PipelineError> {
    let err = |e: crate::ingest::IngestError| PipelineError::new(FailureKind::Data, "ingest", e);
    let need = |p: &Option<PathBuf>, name: &str| {
        p.clone().ok_or_else(|| {
            PipelineError::new(
                FailureKind::Config,
                "config",
                format!("input.{name} is required"),
            )
        })
    };
    let flows = read_trade_file(&need(&cfg.input.trade, "trade")?).map_err(err)?;
    let indicators =
        read_indicator_file(&need(&cfg.input.indicators, "indicators")?).map_err(err)?;
    let statics = read_pair_static_file(&need(&cfg.input.statics, "statics")?).map_err(err)?;
    let memberships = match &cfg.input.memberships {
        Some(p) => read_membership_file(p).map_err(err)?,
        None => Vec::new(),
    };
    Ok(IngestData {
        flows,
        indicators,
        statics,
        memberships,
    })
}

/// Loads or generates the configured panel.
pub fn prepare_data(cfg: &RunConfig, log: &mut RunLog) -> Result<PreparedData, PipelineError> {
    let mut prepared = match cfg.run.variant.study() {
        None => prepare_synthetic(&cfg.dgp(), log)?,
        Some(variant) => {
            let data = read_inputs(cfg)?;
            let reporter_code = cfg.input.reporter.as_deref().unwrap_or(REPORTER);
            let reporter = CountryCode::new(reporter_code)
                .map_err(|e| PipelineError::new(FailureKind::Config, "config", e))?;
            let window = cfg.window().expect("study variants have a window");
            let assembled = assemble_gravity_panel_for(&data, reporter, window, variant)
                .map_err(|e| PipelineError::new(FailureKind::Data, "ingest", e))?;
            for w in &assembled.warnings {
                log.log(LogLevel::Warn, w.to_string().trim_start_matches("WARN "));
            }
            log.info(format!(
                "{variant} panel {}-{}: {} entities, {} ingest warnings",
                window.start,
                window.end,
                assembled.panel.entities().len(),
                assembled.warnings.len()
            ));
            let model = default_model_spec(variant);
            PreparedData {
                panel: assembled.panel,
                dependent_label: model.dependent.display_label().to_string(),
                model,
                gmm: default_gmm_spec(variant),
                study: variant.to_string(),
            }
        }
    };
    if let Some(m) = &cfg.model {
        prepared.dependent_label = m.dependent.display_label().to_string();
        prepared.model = m.clone();
    }
    if let Some(g) = &cfg.gmm {
        prepared.gmm = g.clone();
    }
    Ok(prepared)
}

/// The model without excluded instruments, so that instrument lags do not
/// shrink the FE/RE sample.
fn without_instruments(spec: &ModelSpec) -> ModelSpec {
    ModelSpec {
        instruments: Vec::new(),
        ..spec.clone()
    }
}

/// Serializable record of one run, from which every table is rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub variant: RunVariant,
    pub study: String,
    pub dependent_label: String,
    pub rows: Vec<(String, String)>,
    pub alpha: f64,
    pub unitroot: Vec<UnitRootRecord>,
    pub fixed_effects: Option<EstimationResult>,
    pub random_effects: Option<EstimationResult>,
    pub hausman: Option<HausmanComparison>,
    pub gmm: Option<EstimationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRootRecord {
    pub term: String,
    pub label: String,
    pub ips: Option<crate::unitroot::IpsResult>,
    pub fisher: Option<crate::unitroot::FisherResult>,
}

impl RunResults {
    fn new(cfg: &RunConfig, data: &PreparedData) -> Self {
        RunResults {
            variant: cfg.run.variant,
            study: data.study.clone(),
            dependent_label: data.dependent_label.clone(),
            rows: data
                .model
                .regressors
                .iter()
                .map(|t| (t.name.clone(), t.display_label().to_string()))
                .collect(),
            alpha: cfg.run.alpha,
            unitroot: Vec::new(),
            fixed_effects: None,
            random_effects: None,
            hausman: None,
            gmm: None,
        }
    }

    fn row_specs(&self) -> Vec<RowSpec> {
        self.rows.iter().map(|(n, l)| RowSpec::new(n, l)).collect()
    }

    pub fn gmm_ran(&self) -> bool {
        self.gmm.is_some()
    }

    pub fn unitroot_table(&self) -> Table {
        render_unitroot_table(&[UnitRootStudy {
            name: self.study.clone(),
            rows: self
                .unitroot
                .iter()
                .map(|r| UnitRootRow {
                    label: r.label.clone(),
                    ips: r.ips.clone(),
                    fisher: r.fisher.clone(),
                })
                .collect(),
        }])
    }

    /// FE, RE and (when run) GMM side by side, with the Hausman row.
    pub fn estimates_table(&self) -> Option<Table> {
        let results: Vec<EstimationResult> = [&self.fixed_effects, &self.random_effects, &self.gmm]
            .into_iter()
            .flatten()
            .cloned()
            .collect();
        if results.is_empty() {
            return None;
        }
        Some(render_coefficient_table(
            &results,
            &self.row_specs(),
            self.hausman.as_ref().map(|h| &h.test),
            Some(&self.dependent_label),
        ))
    }

    /// GMM column with its overidentification and first-stage diagnostics.
    pub fn gmm_table(&self) -> Option<Table> {
        let g = self.gmm.as_ref()?;
        let mut t = render_coefficient_table(
            std::slice::from_ref(g),
            &self.row_specs(),
            None,
            Some(&self.dependent_label),
        );
        let mut extra = Vec::new();
        if let (Some(j), Some(df), Some(p)) = (
            g.extras.get("hansen_j"),
            g.extras.get("hansen_j_df"),
            g.extras.get("hansen_j_p"),
        ) {
            extra.push(format!(
                "Hansen J = {} (df {}, p = {})",
                crate::report::format::fixed(*j, 4),
                df,
                crate::report::format::fixed(*p, 4)
            ));
        }
        for (k, v) in &g.extras {
            if let Some(name) = k.strip_prefix("first_stage_f:") {
                extra.push(format!(
                    "First-stage F ({name}) = {}",
                    crate::report::format::fixed(*v, 2)
                ));
            }
        }
        for f in &g.flags {
            extra.push(format!("Flag: {f}"));
        }
        t.footnotes.extend(extra);
        Some(t)
    }

    fn hausman_csv(h: &HausmanComparison) -> String {
        let mut t = hausman_table(h);
        let blank = || String::new();
        t.rows.push(vec![
            "chi2".into(),
            format!("{}", h.test.statistic),
            blank(),
            blank(),
            blank(),
        ]);
        t.rows.push(vec![
            "df".into(),
            h.test.df.to_string(),
            blank(),
            blank(),
            blank(),
        ]);
        t.rows.push(vec![
            "p_value".into(),
            format!("{}", h.test.p_value),
            blank(),
            blank(),
            blank(),
        ]);
        t.rows.push(vec![
            "not_positive_definite".into(),
            h.test
                .flags
                .contains(&TestFlag::NotPositiveDefinite)
                .to_string(),
            blank(),
            blank(),
            blank(),
        ]);
        t.to_csv()
    }

    /// Renders every available table in each format into `dir`; returns
    /// the written paths.
    pub fn write_tables(
        &self,
        dir: &Path,
        formats: &[OutputFormat],
    ) -> Result<Vec<PathBuf>, PipelineError> {
        fs::create_dir_all(dir).map_err(|e| output_err(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: &str, fmt: OutputFormat, body: String| -> Result<(), PipelineError> {
            let path = dir.join(format!("{name}.{}", fmt.extension()));
            fs::write(&path, body).map_err(|e| output_err(&path, e))?;
            written.push(path);
            Ok(())
        };
        for &fmt in formats {
            if !self.unitroot.is_empty() {
                let t = self.unitroot_table();
                put("unitroot", fmt, render(&t, fmt))?;
            }
            if let Some(t) = self.estimates_table() {
                put("estimates", fmt, render(&t, fmt))?;
            }
            if let Some(h) = &self.hausman {
                let body = match fmt {
                    OutputFormat::Markdown => render_hausman_markdown(h),
                    OutputFormat::Csv => Self::hausman_csv(h),
                };
                put("hausman", fmt, body)?;
            }
            if let Some(t) = self.gmm_table() {
                put("gmm", fmt, render(&t, fmt))?;
            }
        }
        Ok(written)
    }

    /// Text rendering of every table, for terminal output.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.unitroot.is_empty() {
            out.push_str(&self.unitroot_table().to_text());
            out.push('\n');
        }
        if let Some(t) = self.estimates_table() {
            out.push_str(&t.to_text());
            out.push('\n');
        }
        if let Some(h) = &self.hausman {
            out.push_str(&render_hausman_block(h));
        }
        out
    }
}

fn render(t: &Table, fmt: OutputFormat) -> String {
    match fmt {
        OutputFormat::Markdown => t.to_markdown(),
        OutputFormat::Csv => t.to_csv(),
    }
}

/// Panel unit-root tests on the configured model terms. Failures of a
/// single term are logged and leave its cells blank.
pub fn unitroot_stage(
    cfg: &RunConfig,
    data: &PreparedData,
    log: &mut RunLog,
) -> Result<Vec<UnitRootRecord>, PipelineError> {
    let opts = &cfg.unitroot;
    let model = &data.model;
    let terms: Vec<&Term> = match &opts.terms {
        Some(names) => names
            .iter()
            .map(|n| {
                model.term(n).ok_or_else(|| {
                    PipelineError::new(
                        FailureKind::Config,
                        "unitroot",
                        format!("unitroot.terms names unknown term {n:?}"),
                    )
                })
            })
            .collect::<Result<_, _>>()?,
        None => {
            let design = design_matrix(&data.panel, &without_instruments(model))
                .map_err(|e| data_err("design")(e.to_string()))?;
            std::iter::once(&model.dependent)
                .chain(model.regressors.iter().filter(|t| {
                    t.role == Role::Continuous
                        && design
                            .column_index(&t.name)
                            .is_some_and(|j| !design.columns()[j].time_invariant)
                }))
                .collect()
        }
    };
    let mut records = Vec::new();
    for term in terms {
        let probe = Term {
            name: format!("__unitroot.{}", term.name),
            ..term.clone()
        };
        let outcome = materialize_term(&data.panel, &probe)
            .map_err(|e| e.to_string())
            .and_then(|ds| {
                panel_unit_root(&ds, &probe.name, opts.lags, opts.deterministics)
                    .map_err(|e| e.to_string())
            });
        let mut rec = UnitRootRecord {
            term: term.name.clone(),
            label: term.display_label().to_string(),
            ips: None,
            fisher: None,
        };
        match outcome {
            Ok((mut ips, mut fisher)) => {
                ips.variable = term.name.clone();
                fisher.variable = term.name.clone();
                log.info(format!(
                    "unit root {}: IPS W = {:.4} (p {:.4}), Fisher = {:.4} (p {:.4}), {} series, {} excluded",
                    term.name,
                    ips.w_stat,
                    ips.p_value,
                    fisher.statistic,
                    fisher.p_value,
                    ips.n_series,
                    ips.excluded.len()
                ));
                rec.ips = Some(ips);
                rec.fisher = Some(fisher);
            }
            Err(e) => log.warn(format!("unit root {} not computed: {e}", term.name)),
        }
        records.push(rec);
    }
    Ok(records)
}

/// FE, RE, Hausman and, when the Hausman p-value is below `alpha`, IV-GMM.
pub fn estimation_stage(
    cfg: &RunConfig,
    data: &PreparedData,
    results: &mut RunResults,
    log: &mut RunLog,
) -> Result<(), PipelineError> {
    let base = without_instruments(&data.model);
    let problem =
        design_matrix(&data.panel, &base).map_err(|e| data_err("design")(e.to_string()))?;
    log.info(format!(
        "design: {} observations, {} columns, {} rows dropped",
        problem.n_obs(),
        problem.n_cols(),
        problem.drop_log().len()
    ));
    let fe = fixed_effects(&problem).map_err(|e| numerical_err("fixed_effects")(e.to_string()))?;
    log.info(format!(
        "fixed effects: R2 = {:.4}, n = {}",
        fe.r_squared, fe.n_obs
    ));
    let re =
        random_effects(&problem).map_err(|e| numerical_err("random_effects")(e.to_string()))?;
    log.info(format!(
        "random effects: R2 = {:.4}, n = {}",
        re.r_squared, re.n_obs
    ));
    for f in &re.flags {
        log.warn(format!("random effects flag: {f}"));
    }
    let cmp = hausman_comparison(&fe, &re).map_err(|e| numerical_err("hausman")(e.to_string()))?;
    let t = &cmp.test;
    log.info(format!(
        "Hausman chi2({}) = {:.4}, p = {}",
        t.df, t.statistic, t.p_value
    ));
    for f in &t.flags {
        log.warn(format!("Hausman flag: {f}"));
    }
    let reject = t.p_value < cfg.run.alpha;
    results.fixed_effects = Some(fe);
    results.random_effects = Some(re);
    results.hausman = Some(cmp.clone());

    if !reject {
        log.info(format!(
            "{GMM_SKIPPED} (p = {} >= alpha = {})",
            t.p_value, cfg.run.alpha
        ));
        return Ok(());
    }
    log.info(format!(
        "Hausman rejected at alpha = {}; estimating IV-GMM",
        cfg.run.alpha
    ));
    let gp =
        design_matrix(&data.panel, &data.model).map_err(|e| data_err("design")(e.to_string()))?;
    let gmm = iv_gmm(&gp, &data.gmm).map_err(|e| numerical_err("gmm")(e.to_string()))?;
    if let Some(j) = gmm.extras.get("hansen_j") {
        log.info(format!(
            "GMM: n = {}, Hansen J = {:.4}, p = {}",
            gmm.n_obs,
            j,
            gmm.extras.get("hansen_j_p").copied().unwrap_or(f64::NAN)
        ));
    }
    for f in &gmm.flags {
        log.warn(format!("GMM flag: {f}"));
    }
    results.gmm = Some(gmm);
    Ok(())
}

/// Everything a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub results: RunResults,
    pub artifacts: Vec<PathBuf>,
    pub log: RunLog,
}

/// Runs the configuration at `config_path`.
pub fn run_pipeline(config_path: &Path) -> Result<PipelineOutcome, PipelineError> {
    let cfg = RunConfig::load(config_path)?;
    run_with_config(&cfg)
}

/// Runs an already loaded configuration. `run.log` is written even when a
/// stage fails, provided the output directory can be created.
pub fn run_with_config(cfg: &RunConfig) -> Result<PipelineOutcome, PipelineError> {
    let mut log = RunLog::new(cfg.run.log_level);
    log.info(format!("variant {}", cfg.run.variant));
    let result = run_stages(cfg, &mut log);
    let dir = &cfg.run.out_dir;
    match result {
        Ok(results) => {
            let mut artifacts = results.write_tables(dir, &cfg.run.formats)?;
            let json = dir.join("results.json");
            let body = serde_json::to_string_pretty(&results)
                .map_err(|e| PipelineError::new(FailureKind::Output, "output", e))?;
            fs::write(&json, body).map_err(|e| output_err(&json, e))?;
            artifacts.push(json);
            log.info(format!(
                "wrote {} artifacts to {}",
                artifacts.len() + 1,
                dir.display()
            ));
            let log_path = dir.join("run.log");
            fs::write(&log_path, log.text()).map_err(|e| output_err(&log_path, e))?;
            artifacts.push(log_path);
            Ok(PipelineOutcome {
                results,
                artifacts,
                log,
            })
        }
        Err(e) => {
            log.log(LogLevel::Error, e.summary());
            if fs::create_dir_all(dir).is_ok() {
                let _ = fs::write(dir.join("run.log"), log.text());
            }
            Err(e)
        }
    }
}

fn run_stages(cfg: &RunConfig, log: &mut RunLog) -> Result<RunResults, PipelineError> {
    let data = prepare_data(cfg, log)?;
    let mut results = RunResults::new(cfg, &data);
    if cfg.unitroot.enabled {
        results.unitroot = unitroot_stage(cfg, &data, log)?;
    }
    estimation_stage(cfg, &data, &mut results, log)?;
    Ok(results)
}

/// Runs only the unit-root stage and writes `unitroot.*`.
pub fn run_unitroot_only(cfg: &RunConfig) -> Result<PipelineOutcome, PipelineError> {
    let mut log = RunLog::new(cfg.run.log_level);
    let data = prepare_data(cfg, &mut log)?;
    let mut results = RunResults::new(cfg, &data);
    results.unitroot = unitroot_stage(cfg, &data, &mut log)?;
    let artifacts = results.write_tables(&cfg.run.out_dir, &cfg.run.formats)?;
    Ok(PipelineOutcome {
        results,
        artifacts,
        log,
    })
}

/// Runs estimation (FE, RE, Hausman, conditional GMM) without unit roots.
pub fn run_estimation_only(cfg: &RunConfig) -> Result<PipelineOutcome, PipelineError> {
    let mut log = RunLog::new(cfg.run.log_level);
    let data = prepare_data(cfg, &mut log)?;
    let mut results = RunResults::new(cfg, &data);
    estimation_stage(cfg, &data, &mut results, &mut log)?;
    let artifacts = results.write_tables(&cfg.run.out_dir, &cfg.run.formats)?;
    Ok(PipelineOutcome {
        results,
        artifacts,
        log,
    })
}

/// Re-renders tables from a saved `results.json`.
pub fn render_saved(
    results_json: &Path,
    out_dir: &Path,
    formats: &[OutputFormat],
) -> Result<Vec<PathBuf>, PipelineError> {
    let text = fs::read_to_string(results_json).map_err(|e| {
        PipelineError::new(
            FailureKind::Data,
            "report",
            format!("{}: {e}", results_json.display()),
        )
    })?;
    let results: RunResults = serde_json::from_str(&text).map_err(|e| {
        PipelineError::new(
            FailureKind::Data,
            "report",
            format!("{}: {e}", results_json.display()),
        )
    })?;
    results.write_tables(out_dir, formats)
}

/// Long-format CSV of every present cell: `entity,year,variable,value`.
pub fn panel_to_csv(ds: &PanelDataset) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["entity", "year", "variable", "value"])
        .expect("in-memory write");
    for o in ds.to_observations() {
        w.write_record([
            o.entity.to_string(),
            o.year.to_string(),
            o.variable,
            format!("{}", o.value),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Lines of the Hausman block, re-exported for callers printing a summary.
pub fn hausman_lines(h: &HausmanComparison) -> Vec<String> {
    hausman_summary_lines(&h.test)
}
