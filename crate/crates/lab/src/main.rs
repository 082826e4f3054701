use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use npivlab::config::{set_field, ExperimentConfig, ExperimentKind};
use npivlab::table::{emit_csv, write_csv};
use npivlab::{experiments, LabError, Result};
use serde_json::Value;

/// Ill-posedness experiments for nonparametric IV regression.
#[derive(Parser)]
#[command(name = "npivlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Counterexample sequence: distance, criterion and shape flags per n.
    Demo(Common),
    /// Singular values of the discretized operator.
    Svd(Common),
    /// Naive, Tikhonov and shape-constrained estimators side by side.
    Compare(Common),
    /// Sampled plug-in estimation over repeated draws.
    Montecarlo(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; omitted fields take the experiment defaults.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// CSV destination; stdout when neither this nor the config names one.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Overrides one config field, e.g. `--set dgp.rho=0.9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn load(kind: ExperimentKind, args: &Common) -> Result<ExperimentConfig> {
    let mut doc = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text)
                .map_err(|e| LabError::config(format!("{}: malformed JSON: {e}", path.display())))?
        }
        None => Value::Object(Default::default()),
    };
    if !doc.is_object() {
        return Err(LabError::config("config must be a JSON object"));
    }
    for o in &args.overrides {
        let (key, value) = o
            .split_once('=')
            .ok_or_else(|| LabError::config(format!("--set expects KEY=VALUE, got {o:?}")))?;
        set_field(&mut doc, key.trim(), value)?;
    }
    if let Some(seed) = args.seed {
        set_field(&mut doc, "seed", &seed.to_string())?;
    }
    if let Some(out) = &args.out {
        doc["output"] = Value::String(out.display().to_string());
    }
    ExperimentConfig::from_value(doc, Some(kind))
}

fn run(cli: Cli) -> Result<()> {
    let (kind, args) = match &cli.command {
        Command::Demo(a) => (ExperimentKind::IllposednessDemo, a),
        Command::Svd(a) => (ExperimentKind::SvdReport, a),
        Command::Compare(a) => (ExperimentKind::EstimatorComparison, a),
        Command::Montecarlo(a) => (ExperimentKind::Montecarlo, a),
    };
    let cfg = load(kind, args)?;
    let table = experiments::run(&cfg)?;
    for c in &table.checks {
        eprintln!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    match &cfg.output {
        Some(path) => emit_csv(&table, path),
        None => write_csv(&table, std::io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("npivlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
