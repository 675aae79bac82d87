//! File formats, run configuration and the `stratseir` command line for the
//! stratified SEIR model: fitting, forecasting, reproduction numbers, CRPS
//! scoring, what-if scenarios and synthetic data.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod synth;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::RunConfig;
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "stratseir", version, about = "Deprivation-age stratified stochastic SEIR model")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "stratseir-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PosteriorArgs {
    /// Directory written by `fit`; overrides `posterior_dir`.
    #[arg(long)]
    pub posterior: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to observed cases by MCMC.
    Fit,
    /// Run one forward simulation from the synthetic parameters.
    Simulate,
    /// Forecast cases beyond the fitted window.
    Forecast(PosteriorArgs),
    /// Reproduction numbers at the end of the fitted window.
    Rt(PosteriorArgs),
    /// Score posterior predictive cases against observations.
    Crps {
        #[command(flatten)]
        posterior: PosteriorArgs,
        /// Observed cases to score; defaults to `data.cases`.
        #[arg(long)]
        observed: Option<PathBuf>,
    },
    /// Forecast under a scenario and trace the deprivation ordering.
    Scenario {
        #[command(flatten)]
        posterior: PosteriorArgs,
        /// Named preset; overrides the configured scenario.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Generate synthetic case data.
    Synth,
}

/// Loads the configuration, applies flag overrides and runs the command.
pub fn run(cli: &Cli) -> CliResult<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        cfg.seed = seed;
    }
    let out = &cli.common.out;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let posterior_dir = |args: &PosteriorArgs| -> CliResult<PathBuf> {
        args.posterior
            .clone()
            .or_else(|| cfg.posterior_dir.clone())
            .ok_or_else(|| CliError::Config("no posterior directory: pass --posterior or set posterior_dir".into()))
    };
    match &cli.command {
        Command::Fit => commands::fit(&cfg, out),
        Command::Simulate => commands::simulate(&cfg, out),
        Command::Forecast(p) => commands::forecast(&cfg, out, &posterior_dir(p)?),
        Command::Rt(p) => commands::rt(&cfg, out, &posterior_dir(p)?),
        Command::Crps { posterior, observed } => {
            commands::crps(&cfg, out, &posterior_dir(posterior)?, observed.as_deref())
        }
        Command::Scenario { posterior, preset } => {
            let scenario = match preset {
                Some(name) => Some(config::ScenarioConfig::from_preset(name)?),
                None => cfg.scenario.clone(),
            };
            let scenario = scenario.ok_or_else(|| {
                CliError::Config("scenario needs --preset or a scenario section in the config".into())
            })?;
            commands::scenario(&cfg, out, &posterior_dir(posterior)?, &scenario)
        }
        Command::Synth => commands::synth(&cfg, out),
    }
}
