use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gravpanel_core::config::{LogLevel, OutputFormat, RunConfig, RunVariant};
use gravpanel_core::pipeline::{
    panel_to_csv, prepare_data, prepare_synthetic, render_saved, run_estimation_only,
    run_unitroot_only, run_with_config, FailureKind, PipelineError, PipelineOutcome, RunLog,
};

#[derive(Debug, Parser)]
#[command(
    name = "gravpanel",
    version,
    about = "Panel gravity-model estimation pipeline"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding run.out_dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// markdown, csv or both.
    #[arg(long, global = true, value_name = "FORMAT")]
    format: Option<String>,
    /// Seed of the synthetic generator.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// error, warn, info or debug.
    #[arg(long = "log-level", global = true, value_name = "LEVEL")]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the configured panel and write it as panel.csv.
    Ingest,
    /// Panel unit-root pretests.
    Unitroot,
    /// FE, RE, Hausman and IV-GMM when the Hausman test rejects.
    Estimate,
    /// Re-render tables from a saved results.json.
    Report {
        #[arg(long, value_name = "PATH")]
        results: Option<PathBuf>,
    },
    /// Generate a synthetic panel (panel.csv and truth.json).
    Simulate,
    /// Full pipeline.
    Run,
}

fn config_error(message: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(FailureKind::Config, "config", message)
}

fn output_error(path: &Path, e: std::io::Error) -> PipelineError {
    PipelineError::new(
        FailureKind::Output,
        "output",
        format!("{}: {e}", path.display()),
    )
}

fn formats(cli: &Cli) -> Result<Option<Vec<OutputFormat>>, PipelineError> {
    cli.format
        .as_deref()
        .map(OutputFormat::parse_set)
        .transpose()
        .map_err(config_error)
}

/// Loads `--config` (or a default synthetic config when allowed) and applies
/// the global overrides.
fn load_config(cli: &Cli, synthetic_default: bool) -> Result<RunConfig, PipelineError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None if synthetic_default => RunConfig::from_toml("[run]\nvariant = \"synthetic\"\n")?,
        None => return Err(config_error("--config PATH is required for this command")),
    };
    if let Some(out) = &cli.out {
        cfg.run.out_dir = out.clone();
    }
    if let Some(f) = formats(cli)? {
        cfg.run.formats = f;
    }
    if let Some(level) = &cli.log_level {
        cfg.run.log_level = level.parse::<LogLevel>().map_err(config_error)?;
    }
    if let Some(seed) = cli.seed {
        if cfg.run.variant != RunVariant::Synthetic {
            return Err(config_error("--seed applies only to synthetic runs"));
        }
        let mut dgp = cfg.dgp();
        dgp.seed = seed;
        cfg.synthetic = Some(dgp);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_log(log: &RunLog) {
    for line in &log.lines {
        eprintln!("{line}");
    }
}

fn print_artifacts(outcome: &PipelineOutcome) {
    for p in &outcome.artifacts {
        println!("{}", p.display());
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    }
    fs::write(path, body).map_err(|e| output_error(path, e))
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::Run => {
            let cfg = load_config(cli, false)?;
            let outcome = run_with_config(&cfg)?;
            print_log(&outcome.log);
            print_artifacts(&outcome);
        }
        Command::Unitroot => {
            let cfg = load_config(cli, false)?;
            let outcome = run_unitroot_only(&cfg)?;
            print_log(&outcome.log);
            print_artifacts(&outcome);
        }
        Command::Estimate => {
            let cfg = load_config(cli, false)?;
            let outcome = run_estimation_only(&cfg)?;
            print_log(&outcome.log);
            print_artifacts(&outcome);
        }
        Command::Ingest => {
            let cfg = load_config(cli, false)?;
            let mut log = RunLog::new(cfg.run.log_level);
            let data = prepare_data(&cfg, &mut log)?;
            print_log(&log);
            let path = cfg.run.out_dir.join("panel.csv");
            write_file(&path, &panel_to_csv(&data.panel))?;
            println!("{}", path.display());
        }
        Command::Simulate => {
            let cfg = load_config(cli, true)?;
            if cfg.run.variant != RunVariant::Synthetic {
                return Err(config_error("simulate needs variant = \"synthetic\""));
            }
            let mut log = RunLog::new(cfg.run.log_level);
            let dgp = cfg.dgp();
            let data = prepare_synthetic(&dgp, &mut log)?;
            print_log(&log);
            let panel = cfg.run.out_dir.join("panel.csv");
            write_file(&panel, &panel_to_csv(&data.panel))?;
            let truth = cfg.run.out_dir.join("truth.json");
            let body = serde_json::to_string_pretty(&dgp.beta_true).expect("string keys");
            write_file(&truth, &body)?;
            println!("{}\n{}", panel.display(), truth.display());
        }
        Command::Report { results } => {
            let (out_dir, fmts) = match &cli.config {
                Some(_) => {
                    let cfg = load_config(cli, false)?;
                    (cfg.run.out_dir, cfg.run.formats)
                }
                None => (
                    cli.out.clone().unwrap_or_else(|| PathBuf::from("out")),
                    formats(cli)?
                        .unwrap_or_else(|| vec![OutputFormat::Markdown, OutputFormat::Csv]),
                ),
            };
            let source = results
                .clone()
                .unwrap_or_else(|| out_dir.join("results.json"));
            for p in render_saved(&source, &out_dir, &fmts)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.summary());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
