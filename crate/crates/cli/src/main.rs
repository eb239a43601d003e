//! `simodel` experiment runner.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 configuration error, 3 numerical
//! failure, 4 some trials aborted.

mod commands;
mod config;
mod error;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::CliError;
use crate::output::Output;

#[derive(Debug, Parser)]
#[command(name = "simodel", version, about = "Single-index model experiments")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Gegenbauer curves and largest zeros.
    Landscape(Args),
    /// SGD trajectories at one dimension.
    Runs(Args),
    /// Hitting-time scaling across dimensions.
    Sweep(Args),
    /// Polynomial invariant audit.
    Audit(Args),
    /// Non-Gaussian landscape deviations.
    Perturb(Args),
}

#[derive(Debug, clap::Args)]
struct Args {
    /// TOML experiment file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SIMODEL_OUT")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Skip SVG plots.
    #[arg(long)]
    no_plots: bool,
}

impl Verb {
    fn split(&self) -> (ExperimentKind, &Args) {
        match self {
            Verb::Landscape(a) => (ExperimentKind::LandscapeCurve, a),
            Verb::Runs(a) => (ExperimentKind::SgdRuns, a),
            Verb::Sweep(a) => (ExperimentKind::ScalingSweep, a),
            Verb::Audit(a) => (ExperimentKind::PolynomialAudit, a),
            Verb::Perturb(a) => (ExperimentKind::PerturbationReport, a),
        }
    }
}

fn run(verb: &Verb) -> Result<PathBuf, CliError> {
    let (kind, args) = verb.split();
    let (mut cfg, text) = ExperimentConfig::load(&args.config)?;
    if cfg.kind != kind {
        return Err(CliError::Config(format!(
            "`{}` expects kind `{}`, the file has `{}`",
            kind.verb(),
            kind.verb(),
            cfg.kind.verb()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.threads == Some(0) {
        return Err(CliError::Config("threads must be at least 1".into()));
    }
    if let Some(n) = args.threads.or(cfg.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let dir = args
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("out").join(kind.verb()));
    let mut out = Output::create(&dir, kind.verb(), &text, cfg.seed, cfg.plots && !args.no_plots)?;
    commands::dispatch(&cfg, &mut out)?;
    Ok(dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli.verb) {
        Ok(dir) => {
            log::info!("results in {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
