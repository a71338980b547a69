// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AllanArgs, FitArgs, Model};
use config::Config;

/// Failure classes with their process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent input (exit 2).
    Input(String),
    /// A fit that did not converge (exit 3).
    NonConvergence(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::NonConvergence(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) | CliError::NonConvergence(m) => f.write_str(m),
        }
    }
}

impl From<dephasim_core::Error> for CliError {
    fn from(e: dephasim_core::Error) -> Self {
        match e {
            dephasim_core::Error::NonConvergence { .. } => CliError::NonConvergence(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(name = "dephasim", version, about = "Dephasing of trapped-atom hyperfine qubits: simulation, fits and noise budgets")]
struct Cli {
    /// Scenario file (sectioned key = value)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed; overrides DEPHASIM_SEED and the config file
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ramsey, spin-echo or Rabi signal: closed form next to a Monte Carlo ensemble
    Simulate,
    /// Fit a model to a `t_s,p3[,weight]` dataset
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        model: Model,
        /// Read P3 from this named column, e.g. p3_analytic of a simulate export
        #[arg(long)]
        column: Option<String>,
        /// π-pulse time for the echo model
        #[arg(long)]
        tau_pi_ms: Option<f64>,
        /// Initial value, name=value in report units (detuning_hz, t2star_ms, ...)
        #[arg(long = "init", value_name = "NAME=VALUE")]
        init: Vec<String>,
    },
    /// Table of dephasing mechanisms evaluated at T2'
    Budget {
        /// Predicted echo-visibility curve V(2τ_π)
        #[arg(long)]
        visibility_out: Option<PathBuf>,
    },
    /// Allan deviation of a `time_s,value` series
    Allan {
        #[arg(long)]
        series: Option<PathBuf>,
        /// Averaging times in seconds; an octave ladder when omitted
        #[arg(long, value_delimiter = ',')]
        tau: Vec<f64>,
        /// Skip normalization to the series mean
        #[arg(long)]
        raw: bool,
    },
}

fn seed(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("DEPHASIM_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Input(format!("DEPHASIM_SEED=`{s}` is not a non-negative integer"))),
        Err(_) => Ok(None),
    }
}

fn load(path: Option<&PathBuf>, command: &str) -> Result<Config, CliError> {
    let path = path.ok_or_else(|| CliError::Input(format!("{command} needs --config")))?;
    Config::from_path(path)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = seed(cli.seed)?;
    match cli.command {
        Command::Simulate => commands::simulate(&load(cli.config.as_ref(), "simulate")?, seed, cli.out),
        Command::Fit {
            data,
            model,
            column,
            tau_pi_ms,
            init,
        } => commands::fit(&FitArgs {
            data,
            model,
            column,
            tau_pi_ms,
            init,
            out: cli.out,
        }),
        Command::Budget { visibility_out } => commands::budget(&load(cli.config.as_ref(), "budget")?, cli.out, visibility_out),
        Command::Allan { series, tau, raw } => {
            let cfg = cli.config.as_deref().map(Config::from_path).transpose()?;
            commands::allan(cfg.as_ref(), &AllanArgs { series, tau, raw, out: cli.out })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
