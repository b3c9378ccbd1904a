//! Command-line driver: configuration, replication batches, validation
//! checks and file outputs.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use dpp_cftp::diagnostics::DiagnosticsError;
use dpp_cftp::dominating::InitialDepth;
use dpp_cftp::oracle::OracleError;
use dpp_cftp::{AlphaSpec, Family, KernelError};
use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

#[derive(Debug, Parser)]
#[command(name = "dpp-cftp", version, about = "Perfect sampling of stationary determinantal point processes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw exact samples and write one pattern and report per replication.
    Sample(RunArgs),
    /// Run a batch and check counts, pair correlation and timing.
    Validate(RunArgs),
    /// Compare count distributions of CFTP and the grid oracle.
    OracleCompare(RunArgs),
    /// Write the exact count distribution.
    Pmf(RunArgs),
    /// Estimate the pair correlation function from a batch.
    Pcf(RunArgs),
}

/// Flags override values from `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<Family>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Range parameter, or "max/2".
    #[arg(long)]
    pub alpha: Option<AlphaSpec>,
    /// Shape parameter for the Matérn and Cauchy families.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Side of the square window.
    #[arg(long)]
    pub side: Option<f64>,
    /// Fraction of the expected count the retained modes must reach.
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long)]
    pub max_order: Option<usize>,
    /// "half" or "log".
    #[arg(long)]
    pub initial_depth: Option<InitialDepth>,
    #[arg(long)]
    pub max_depth: Option<f64>,
    #[arg(long, short = 'n')]
    pub replications: Option<usize>,
    /// Root seed; replication i uses seed + i. Falls back to $DPP_CFTP_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
    /// Grid side for the oracle (default 32).
    #[arg(long)]
    pub grid_size: Option<usize>,
    #[arg(long)]
    pub rmax: Option<f64>,
    #[arg(long)]
    pub nbins: Option<usize>,
    /// Worker threads for replications.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl RunArgs {
    /// Merges the config file, flags and the seed environment variable.
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        self.resolve_with_env(std::env::var(config::SEED_ENV).ok())
    }

    pub fn resolve_with_env(&self, env_seed: Option<String>) -> Result<RunConfig, CliError> {
        let (mut config, file_has_seed) = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                let raw: serde_json::Value = serde_json::from_str(&text)?;
                let has_seed = raw.get("root_seed").is_some();
                (serde_json::from_value::<RunConfig>(raw)?, has_seed)
            }
            None => (RunConfig::default(), false),
        };
        macro_rules! apply {
            ($($flag:ident => $field:ident),* $(,)?) => {
                $(if let Some(v) = &self.$flag {
                    config.$field = v.clone();
                })*
            };
        }
        apply!(
            family => family,
            rho => rho,
            alpha => alpha,
            side => side,
            coverage => coverage_target,
            max_order => max_order,
            initial_depth => initial_depth,
            replications => replications,
            output => output,
            rmax => rmax,
            nbins => nbins,
        );
        if self.nu.is_some() {
            config.nu = self.nu;
        }
        if self.max_depth.is_some() {
            config.max_depth = self.max_depth;
        }
        if self.grid_size.is_some() {
            config.grid_size = self.grid_size;
        }
        match (self.seed, file_has_seed, env_seed) {
            (Some(seed), _, _) => config.root_seed = seed,
            (None, false, Some(text)) => {
                config.root_seed = text
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{} is not a seed: {text:?}", config::SEED_ENV)))?;
            }
            _ => {}
        }
        Ok(config)
    }
}

type Handler = fn(&RunConfig) -> Result<bool, CliError>;

/// Runs a parsed command; `Ok(true)` iff every requested check passed.
pub fn run(cli: &Cli) -> Result<bool, CliError> {
    let (args, command): (&RunArgs, Handler) = match &cli.command {
        Command::Sample(a) => (a, commands::sample),
        Command::Validate(a) => (a, commands::validate),
        Command::OracleCompare(a) => (a, commands::oracle_compare),
        Command::Pmf(a) => (a, commands::pmf),
        Command::Pcf(a) => (a, commands::pcf),
    };
    configure_threads(args.jobs)?;
    let config = args.resolve()?;
    command(&config)
}

#[cfg(feature = "parallel")]
fn configure_threads(jobs: Option<usize>) -> Result<(), CliError> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} worker threads: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(_jobs: Option<usize>) -> Result<(), CliError> {
    Ok(())
}
