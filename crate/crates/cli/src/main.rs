//! `cs3`: batch driver for the cascade segmentation pipeline.

mod eval;
mod segment;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cs3_core::manifest::PipelineConfig;

/// Exit status: 0 success, 1 some images failed, 2 bad input or
/// configuration, 3 remote backend unreachable.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self { code: 2, error: error.into() }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cs3", version, about = "Cascade instance segmentation of overlapping sperm-like structures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the pipeline on every PNG in a directory.
    Segment(segment::Args),
    /// Score result manifests against ground-truth manifests.
    Eval(eval::Args),
    /// Generate synthetic scenes with ground truth.
    Synth(synth::Args),
    /// Print the default configuration.
    Config {
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Segment(args) => segment::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Synth(args) => synth::run(args),
        Command::Config { out } => {
            let text = PipelineConfig::default().to_json();
            match out {
                Some(path) => std::fs::write(&path, text)
                    .map_err(|e| Failure { code: 1, error: anyhow::anyhow!("{}: {e}", path.display()) }),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
