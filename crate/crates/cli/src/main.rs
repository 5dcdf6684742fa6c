//! `gpstack`: generate synthetic ranking tasks, train stacked ensembles, predict ranks and
//! score them.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 data error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gpstack::metrics::TauVariant;
use gpstack::rank_transform::BackTransform;

use commands::{Common, Context, EvaluateArgs, PredictArgs, SynthGenArgs, TrainArgs};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "gpstack",
    version,
    about = "Stacked boosted-tree architecture ranking"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Pipeline configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Restrict to these task ids (repeatable). Defaults to every task found.
    #[arg(long = "task", value_name = "ID")]
    tasks: Vec<u32>,
    /// Upper bound on tasks processed in parallel.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
    /// Global seed; overrides `global.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

impl CommonArgs {
    fn to_common(&self) -> Common {
        Common {
            config: self.config.clone(),
            tasks: self.tasks.clone(),
            jobs: self.jobs.map(|j| j as usize),
            seed: self.seed,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic train/test task files and a seed manifest.
    SynthGen {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory (default `global.data_dir`, else `data`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Test-set size per task.
        #[arg(long)]
        n_test: Option<usize>,
        /// Use the full challenge-sized test set.
        #[arg(long)]
        challenge_scale: bool,
    },
    /// Fit one stacked ensemble per task from `task<N>/train.csv`.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Latent-to-rank mapping stored with the ensemble: `exact` or `paper`.
        #[arg(long)]
        back_transform: Option<BackTransform>,
        /// Tau variant for the out-of-fold report: `b` or `a`.
        #[arg(long)]
        tau: Option<TauVariant>,
    },
    /// Rank `task<N>/test.csv` with each task's ensemble.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        /// Candidate-pool size for the back-transform (default: rows in the test file).
        #[arg(long)]
        n_test: Option<usize>,
        /// Override the ensemble's stored mapping: `exact` or `paper`.
        #[arg(long)]
        back_transform: Option<BackTransform>,
    },
    /// Score predictions against the true test ranks.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
        /// `b` (default) or `a`.
        #[arg(long)]
        tau: Option<TauVariant>,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::SynthGen {
            common,
            out,
            n_test,
            challenge_scale,
        } => commands::synth_gen(
            &Context::new(&common.to_common())?,
            &SynthGenArgs {
                out,
                n_test,
                challenge_scale,
            },
        ),
        Command::Train {
            common,
            data,
            models,
            back_transform,
            tau,
        } => commands::train(
            &Context::new(&common.to_common())?,
            &TrainArgs {
                data,
                models,
                back_transform,
                tau,
            },
        ),
        Command::Predict {
            common,
            data,
            models,
            n_test,
            back_transform,
        } => commands::predict(
            &Context::new(&common.to_common())?,
            &PredictArgs {
                data,
                models,
                n_test,
                back_transform,
            },
        ),
        Command::Evaluate {
            common,
            data,
            models,
            tau,
            report,
        } => commands::evaluate(
            &Context::new(&common.to_common())?,
            &EvaluateArgs {
                data,
                models,
                tau,
                report,
            },
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gpstack: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
