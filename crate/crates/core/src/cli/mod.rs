//! The `cmrf` command line: `simulate`, `map`, `sample`, `diagnose` and `realize`
//! share one JSON experiment config and one output directory.

mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "cmrf", version, about = "Bayesian deconvolution with Cauchy Markov random field priors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `n_chains`.
    #[arg(long)]
    pub chains: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate noisy data from the phantom.
    Simulate(Common),
    /// Compute the MAP estimate with L-BFGS.
    Map(Common),
    /// Run MCMC chains started at the MAP estimate.
    Sample(Common),
    /// PSRF, ESS, CM, variance and marginal densities from stored chains.
    Diagnose(Common),
    /// Draw random walks and SPDE fields.
    Realize(Common),
}

impl Common {
    /// Loads the config and applies the command-line overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(chains) = self.chains {
            cfg.n_chains = chains;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(c) => commands::simulate(&c.resolve()?),
        Command::Map(c) => commands::map(&c.resolve()?),
        Command::Sample(c) => commands::sample(&c.resolve()?),
        Command::Diagnose(c) => commands::diagnose_cmd(&c.resolve()?),
        Command::Realize(c) => commands::realize(&c.resolve()?),
    }
}

/// 3 for numerical failures, 2 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) => 3,
        _ => 2,
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
