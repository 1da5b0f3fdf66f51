//! Command-line front end: parses a run configuration, dispatches to one of
//! the five experiment commands, and maps failures onto stable exit codes
//! (0 success, 2 configuration error, 3 numerical divergence, 4 I/O error).

mod commands;
mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rdiffbr_core::Error;

use crate::config::{Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "rdiffbr",
    version,
    about = "Bundle recommendation with residual-diffusion refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Exact output directory, instead of a timestamped one under the output
    /// root (the RDIFFBR_OUT environment variable, or the configured dir).
    #[arg(long)]
    run_dir: Option<PathBuf>,
    /// Override training.seed from the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Override training.epochs from the config file.
    #[arg(long)]
    epochs: Option<usize>,
}

impl CommonArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        RunConfig::load(
            &self.config,
            &Overrides {
                seed: self.seed,
                epochs: self.epochs,
            },
        )
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train the joint model; write checkpoints and a loss curve.
    Train {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Evaluate variants across variation levels and a hyperparameter grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Variation levels: a comma list (-3,0,3) or inclusive range (-4..5).
        #[arg(long, allow_hyphen_values = true)]
        rhos: Option<String>,
        /// Grid axis as key=v1,v2,... over lambda, delta or d; repeatable.
        #[arg(long = "grid")]
        grid: Vec<String>,
        /// Train models in place instead of loading checkpoints.
        #[arg(long)]
        train_first: bool,
    },
    /// Compare backbone, full model, and the no-residual ablation.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// Variation levels; defaults to -3,3.
        #[arg(long, allow_hyphen_values = true)]
        rhos: Option<String>,
        /// Train models in place instead of loading checkpoints.
        #[arg(long)]
        train_first: bool,
    },
    /// Time training epochs with and without the diffusion term.
    Bench {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Nearest items to one bundle's embedding under each variant.
    CaseStudy {
        #[command(flatten)]
        common: CommonArgs,
        /// Bundle to inspect.
        #[arg(long)]
        bundle: u32,
        /// How many nearest items to list.
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Variation level the bundle contents are composed at.
        #[arg(long, default_value_t = -3, allow_hyphen_values = true)]
        rho: i32,
        /// Train models in place instead of loading checkpoints.
        #[arg(long)]
        train_first: bool,
    },
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train { common } => {
            let cfg = common.load()?;
            commands::train::run(&cfg, common.run_dir.as_deref())
        }
        Command::Sweep {
            common,
            rhos,
            grid,
            train_first,
        } => {
            let cfg = common.load()?;
            commands::sweep::run(
                &cfg,
                common.run_dir.as_deref(),
                rhos.as_deref(),
                &grid,
                train_first,
            )
        }
        Command::Ablate {
            common,
            rhos,
            train_first,
        } => {
            let cfg = common.load()?;
            commands::ablate::run(&cfg, common.run_dir.as_deref(), rhos.as_deref(), train_first)
        }
        Command::Bench { common } => {
            let cfg = common.load()?;
            commands::bench::run(&cfg, common.run_dir.as_deref())
        }
        Command::CaseStudy {
            common,
            bundle,
            k,
            rho,
            train_first,
        } => {
            let cfg = common.load()?;
            commands::case_study::run(
                &cfg,
                common.run_dir.as_deref(),
                bundle,
                k,
                rho,
                train_first,
            )
        }
    }
}

/// Stable mapping from failure kinds to process exit codes.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite { .. } => 3,
        Error::Io { .. } | Error::Parse { .. } | Error::MalformedCheckpoint { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
