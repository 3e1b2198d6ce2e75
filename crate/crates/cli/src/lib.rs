//! Command-line driver: configuration parsing, parameter sweeps, correlation
//! series, scattering grids, circuit mapping and verification suites.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod output;
pub mod verify;

use config::{Format, LoadedConfig};
use output::{Metadata, Output};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl From<pairsource::Error> for CliError {
    fn from(e: pairsource::Error) -> Self {
        match e {
            pairsource::Error::InvalidParams(m) => CliError::Config(m),
            other => CliError::Numeric(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pairsource", version, about = "Photon-pair source simulations")]
pub struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (stdout when omitted). Multi-table CSV output writes
    /// `<stem>.<table>.<ext>` next to it.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps (default: available parallelism).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady-state observables, regime and verdict over a parameter grid.
    Sweep,
    /// Pump reflection spectrum and two-/four-photon wavefunction grids.
    Scatter,
    /// Signal and pair correlation series from the master equation.
    Correlate,
    /// Run a verification suite and report deviations against tolerances.
    Verify {
        #[arg(value_enum, default_value_t = verify::Suite::All)]
        suite: verify::Suite,
    },
    /// Two-qubit spectrum, effective parameters and RWA check of the circuit.
    Circuit,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Scatter => "scatter",
            Command::Correlate => "correlate",
            Command::Verify { .. } => "verify",
            Command::Circuit => "circuit",
        }
    }

    fn default_format(&self) -> Format {
        match self {
            Command::Verify { .. } | Command::Circuit => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Runs one invocation; the verification outcome is reported after the
/// report has been written.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>, CliError> {
    let loaded = LoadedConfig::load(cli.config.as_deref())?;
    let cfg = &loaded.config;
    let units = cfg.units()?;
    let jobs = match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let format = cli.format.or(cfg.output.format).unwrap_or_else(|| cli.command.default_format());
    let out_path = cli.out.clone().or_else(|| cfg.output.path.clone());

    let (output, failure): (Output, Option<CliError>) = match &cli.command {
        Command::Sweep => (commands::sweep(cfg, jobs)?, None),
        Command::Scatter => (commands::scatter(cfg)?, None),
        Command::Correlate => (commands::correlate(cfg)?, None),
        Command::Circuit => (commands::circuit(cfg)?, None),
        Command::Verify { suite } => {
            let report = verify::run(*suite, cfg)?;
            let failure = (!report.passed()).then(|| CliError::Verification(report.failure_summary()));
            (report.to_output(), failure)
        }
    };
    let meta = Metadata { command: cli.command.name(), unit: units.unit, config_sha256: output::sha256_hex(&loaded.source) };
    let docs = output::render(&output, &meta, format)?;
    let written = output::emit(&docs, out_path.as_deref())?;
    match failure {
        Some(e) => Err(e),
        None => Ok(written),
    }
}

pub fn run(cli: &Cli) -> ExitCode {
    match execute(cli) {
        Ok(paths) => {
            for p in paths {
                log::info!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
