//! `stit`: batch runner for STIT simulation, estimation and validation.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stit_core::validation::ValidationConfig;

use crate::config::ExperimentConfig;
use crate::output::Output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Run(String),
}

#[derive(Parser)]
#[command(name = "stit", version, about = "Simulate and analyse planar STIT tessellations")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// A tenth of the replications (at least 2).
    #[arg(long, global = true)]
    quick: bool,
    /// Worker threads; all cores by default.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One realization: tessellation.json, tessellation.svg, directions.csv.
    Simulate,
    /// Mean and variance of edge statistics against the closed forms.
    Moments,
    /// Pooled pair-correlation and K estimates.
    Pcf,
    /// Pooled cross K-function of vertices and edge length.
    Crossk,
    /// Rescaled CLT diagnostics over a sweep of window scales.
    Clt,
    /// STIT vs Poisson line curves and asymptotic variance tables.
    Compare,
    /// Runs the acceptance suite; exit 1 on any failure.
    Validate {
        /// Multiply every closed-form target by this factor.
        #[arg(long)]
        mutate: Option<f64>,
        /// Comma-separated criterion ids, e.g. 1,6,10c.
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Moments => "moments",
            Self::Pcf => "pcf",
            Self::Crossk => "crossk",
            Self::Clt => "clt",
            Self::Compare => "compare",
            Self::Validate { .. } => "validate",
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("threads: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(cli.common.config.as_deref())?;
    if let Some(s) = cli.common.seed {
        cfg.seed = Some(s);
    }
    if let Command::Validate { mutate, only } = &cli.command {
        let vcfg = ValidationConfig {
            seed: cfg.seed.unwrap_or(ValidationConfig::default().seed),
            quick: cli.common.quick,
            mutation: *mutate,
            only: only.clone(),
        };
        cfg.seed = Some(vcfg.seed);
        let mut out = Output::new(&cli.common.out, "validate", &cfg, vcfg.seed)?;
        let report = commands::validate(&vcfg, &mut out)?;
        let failed = report.failures();
        if failed.is_empty() {
            println!("all {} criteria passed", report.results.len());
        } else {
            println!("failed: {}", failed.join(", "));
        }
        return Ok(failed.is_empty());
    }
    if cli.common.quick {
        cfg.reps = (cfg.reps / 10).max(2);
    }
    cfg.check()?;
    let mut out = Output::new(&cli.common.out, cli.command.name(), &cfg, cfg.seed())?;
    match cli.command {
        Command::Simulate => commands::simulate(&cfg, &mut out)?,
        Command::Moments => commands::moments(&cfg, &mut out)?,
        Command::Pcf => commands::pcf(&cfg, &mut out)?,
        Command::Crossk => commands::crossk(&cfg, &mut out)?,
        Command::Clt => commands::clt(&cfg, &mut out)?,
        Command::Compare => commands::compare(&cfg, &mut out)?,
        Command::Validate { .. } => unreachable!(),
    }
    for p in &out.written {
        println!("wrote {}", p.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("stit: {e}");
            ExitCode::from(2)
        }
    }
}
