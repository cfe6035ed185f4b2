//! Command-line driver: Liouvillian eigenvalue dumps, emission spectra with
//! line-shape fits, `(p, j)` sweeps and closed-form Jordan-block runs.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{Overrides, RunConfig, Target};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "lepspec", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Liouvillian eigenvalues per p, labeled by sector, with near-degeneracy flags
    Eigs(Args),
    /// Emission spectra per p and source, with Model A/B fits
    Spectrum(Args),
    /// EP weight and dBIC over the (p, j, source) grid
    Sweep(Args),
    /// Closed-form Jordan-block spectra and the eps unfolding sweep
    Synthetic(Args),
}

/// Flags override the matching config entries. `--p` and `--j` accept
/// comma-separated lists; `--j` must be a single value except for `sweep`.
#[derive(Debug, Clone, clap::Args)]
pub struct Args {
    /// TOML config; built-in defaults when omitted
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub j: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Option<Vec<f64>>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub gamma0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Near-degeneracy threshold on raw eigenvalues
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seeds of the random sources (replaces the configured list)
    #[arg(long, value_delimiter = ',')]
    pub seed: Option<Vec<u64>>,
    #[arg(long)]
    pub window_mult: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub grid_max: Option<f64>,
    #[arg(long)]
    pub grid_n: Option<usize>,
}

impl Args {
    fn overrides(&self) -> Overrides {
        Overrides {
            j: self.j.clone(),
            p: self.p.clone(),
            gamma: self.gamma,
            gamma0: self.gamma0,
            h: self.h,
            threshold: self.threshold,
            out: self.out.clone(),
            seed: self.seed.clone(),
            window_mult: self.window_mult,
            grid_min: self.grid_min,
            grid_max: self.grid_max,
            grid_n: self.grid_n,
        }
    }

    /// Config file (or defaults) with the flags applied, validated.
    pub fn resolve(&self, target: Target) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        cfg.apply(&self.overrides(), target)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Eigs(a) => commands::eigs(&a.resolve(Target::Eigs)?),
        Command::Spectrum(a) => commands::spectrum(&a.resolve(Target::Spectrum)?),
        Command::Sweep(a) => commands::sweep(&a.resolve(Target::Sweep)?),
        Command::Synthetic(a) => commands::synthetic(&a.resolve(Target::Synthetic)?),
    }
}
