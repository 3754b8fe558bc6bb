//! `vidrate`: train, evaluate and sweep rate-allocation learners, and run
//! oracle checks.

mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use vidrate_core::trainer::{Method, SweepKind};

/// Exit status for malformed invocations.
const EXIT_USAGE: u8 = 1;
/// Exit status for failures while running a well-formed command.
const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "vidrate",
    version,
    about = "Cache-aware video rate allocation with deep Q-learning"
)]
pub struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "VIDRATE_OUT", default_value = "runs")]
    pub out: PathBuf,

    /// Seed for every random stream the command uses.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a learner and write metrics and, for NAF methods, a checkpoint.
    Train(TrainArgs),
    /// Roll out a checkpoint or a freshly trained method without noise.
    Evaluate(EvaluateArgs),
    /// Train and evaluate methods over a range of buffer sizes or capacities.
    Sweep(SweepArgs),
    /// Run a ground-truth check.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML file with optional `method`, `[env]` and `[train]` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Overrides the configured episode count.
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// NAF checkpoint to evaluate. Without one, `--method` is trained first.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Evaluation episodes; defaults to the configured `eval_episodes`.
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    pub sweep_kind: SweepKind,
    /// `start:end:step` or a comma-separated list of points.
    #[arg(long)]
    pub range: Option<String>,
    /// Comma-separated methods; all five by default.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub method: Vec<Method>,
    /// Number of shared seeds, counted up from `--seed`.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Training episodes per run.
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OracleCheck {
    Bellman,
    #[value(alias = "regret_bound")]
    RegretBound,
    #[value(alias = "regret_empirical")]
    RegretEmpirical,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(value_enum)]
    pub check: OracleCheck,
    /// Number of uniforms in the regret bound.
    #[arg(long, default_value_t = 3)]
    pub m: u64,
    /// Monte Carlo samples for the regret bound.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    /// Rollout length for empirical regret.
    #[arg(long, default_value_t = 20_000)]
    pub horizon: usize,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.trim().parse().map_err(|e: vidrate_core::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<SweepKind, String> {
    s.trim().parse().map_err(|e: vidrate_core::Error| e.to_string())
}

/// Why a command failed, which decides the exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<vidrate_core::Error> for CliError {
    fn from(e: vidrate_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
