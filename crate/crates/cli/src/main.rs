use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pme_lab_cli::config::{ExperimentConfig, Profile};
use pme_lab_cli::pipeline;
use pme_lab_core::error::Error;

/// Reduced-representation lab for parametric shape families: linear PME,
/// its nonlinear extension, and a deep-autoencoder baseline on a synthetic
/// lofted-wing design space.
#[derive(Parser)]
#[command(name = "pme-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config file (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Profile defaults when no config is given, or an override of the
    /// config's profile.
    #[arg(long, global = true, value_parser = ["desk", "paper"])]
    profile: Option<String>,

    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sobol-sample the design box and build the dataset.
    Generate,
    /// Fit the linear embedding.
    FitPme,
    /// Pre-train and freeze the forward surrogate.
    TrainSurrogate,
    /// Train the nonlinear embedding at one latent dimension.
    TrainNlpme {
        #[arg(long)]
        n: usize,
    },
    /// Train the autoencoder baseline at one latent dimension.
    TrainDae {
        #[arg(long)]
        n: usize,
    },
    /// Run every (method, N) cell and assemble the error curves.
    Sweep {
        /// Reuse finished cells.
        #[arg(long)]
        resume: bool,
    },
    /// Emit figures and tables from a finished sweep.
    Report,
}

fn run(cli: Cli) -> pme_lab_core::Result<()> {
    let profile = match cli.profile.as_deref() {
        Some(p) => Some(Profile::parse(p)?),
        None => None,
    };
    let cfg = ExperimentConfig::load(cli.config.as_deref(), profile, cli.out.as_deref())?;
    match cli.command {
        Command::Generate => pipeline::cmd_generate(&cfg).map(drop),
        Command::FitPme => pipeline::cmd_fit_pme(&cfg).map(drop),
        Command::TrainSurrogate => pipeline::cmd_train_surrogate(&cfg).map(drop),
        Command::TrainNlpme { n } => pipeline::cmd_train_nlpme(&cfg, n).map(drop),
        Command::TrainDae { n } => pipeline::cmd_train_dae(&cfg, n).map(drop),
        Command::Sweep { resume } => pipeline::cmd_sweep(&cfg, resume).map(drop),
        Command::Report => pipeline::cmd_report(&cfg).map(drop),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::InvalidParameter(_) => 2,
                Error::Contract(_) | Error::Integrity(_) => 3,
                Error::Numeric(_) | Error::UndefinedMetric(_) => 4,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
