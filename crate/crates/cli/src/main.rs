//! `eqodds`: generate, prepare, train, evaluate and search.
//!
//! Exit codes: 1 usage, 2 validation, 3 I/O, 4 numeric or model-selection failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eqodds::trainer::SensitiveAttribute;
use eqodds::Error;

#[derive(Parser)]
#[command(name = "eqodds", version, about = "Equality-of-odds risk models on synthetic EHR cohorts")]
struct Cli {
    /// Log more to stderr (-v info, -vv debug)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic patient records and print a cohort summary
    Generate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output file (one JSON record per line)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Extract the cohort, build features and write the split
    Prepare {
        #[arg(long)]
        records: PathBuf,
        /// Directory with code-list files (defaults to the shipped lists)
        #[arg(long)]
        codes: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the standard or an adversarial arm
    Train {
        #[arg(long)]
        prepared: PathBuf,
        #[arg(long, default_value = "none")]
        sensitive_attr: SensitiveAttribute,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Write fairness reports for one or more checkpoints
    Evaluate {
        /// Checkpoint file; repeat to compare models side by side
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        prepared: PathBuf,
        #[arg(long, default_value = "test")]
        split: eqodds::cohort::SplitTag,
        #[arg(long, default_value_t = eqodds::metrics::DEFAULT_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search
    Search {
        #[arg(long)]
        prepared: PathBuf,
        /// Config file whose [search] and [train] sections define the grid and base settings
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "none")]
        sensitive_attr: SensitiveAttribute,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation { .. } | Error::Contract(_) | Error::Parse { .. } => 2,
        Error::Io { .. } => 3,
        Error::Numeric { .. } | Error::UndefinedMetric { .. } | Error::SelectionFailed { .. } => 4,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    let result = match cli.command {
        Command::Generate { config, out, seed } => commands::generate(config.as_deref(), &out, seed),
        Command::Prepare { records, codes, out, seed, config } => {
            commands::prepare(&records, codes.as_deref(), &out, seed, config.as_deref())
        }
        Command::Train { prepared, sensitive_attr, lambda, seed, out, config } => {
            commands::train(&prepared, sensitive_attr, lambda, seed, &out, config.as_deref())
        }
        Command::Evaluate { checkpoint, prepared, split, threshold, out } => {
            commands::evaluate(&checkpoint, &prepared, split, threshold, &out)
        }
        Command::Search { prepared, grid, trials, sensitive_attr, seed, out } => {
            commands::search(&prepared, grid.as_deref(), trials, sensitive_attr, seed, &out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
