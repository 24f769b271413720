//! `mdl`: train mode-decomposed and baseline networks, analyze checkpoints,
//! run the online teacher-student theory and sweep the least mode count.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod data;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use commands::analyze::Analysis;
use config::{ExperimentConfig, RawConfig};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "mdl", version, about = "Mode decomposition learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed to run; repeat for several. Replaces the `seeds` key.
    #[arg(long = "seed", global = true, value_name = "N")]
    seeds: Vec<u64>,

    /// Output root; each run writes to `<DIR>/<run_id>/`.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    out: PathBuf,

    /// Override one configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one network per seed; writes metrics, a summary and checkpoints.
    Train,
    /// Analyze a trained checkpoint; writes `analysis/<kind>.csv`.
    Analyze {
        #[arg(value_enum)]
        kind: Analysis,
        /// Checkpoint to analyze (else the `checkpoint` key).
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
    },
    /// Integrate the order-parameter ODEs and simulate online SGD from the same start.
    Theory,
    /// Smallest mode count matching the dense network, per hidden width.
    Leastp,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    for kv in &cli.overrides {
        raw.apply_override(kv)?;
    }
    let cfg = ExperimentConfig::resolve(&raw, &cli.seeds)?;
    match cli.command {
        Command::Train => commands::train::run(&cfg, &cli.out),
        Command::Analyze { kind, checkpoint } => commands::analyze::run(&cfg, kind, checkpoint.as_deref(), &cli.out),
        Command::Theory => commands::theory::run(&cfg, &cli.out),
        Command::Leastp => commands::leastp::run(&cfg, &cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let matches = Cli::command().after_long_help(config::keys_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
