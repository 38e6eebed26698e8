//! Experiment runner around `mogan-core`.
//!
//! Subcommands: `synth`, `resample`, `train`, `eval` and `report`. Each run
//! writes its artifacts and a `manifest.txt` into the output directory.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or lineage
//! error, 3 training diverged.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod manifest;

pub use config::{derive_seed, DatasetSource, ExperimentConfig, RunMethod};
pub use manifest::Manifest;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("lineage check failed: {0}")]
    Lineage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] mogan_core::Error),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(mogan_core::Error::Diverged { .. }) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mogan", version, about = "Imbalanced fault-diagnosis experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Experiment configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the root seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (overrides `out` in the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the configured dataset and write it as CSV.
    Synth(RunArgs),
    /// Split the dataset and oversample the training split.
    Resample(RunArgs),
    /// Train the adversarial model on the training split.
    Train(RunArgs),
    /// Evaluate on the held-out test split.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        /// Checkpoint from a previous `train` run (method `mogan` only).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Collect the macro test metrics of several eval runs.
    Report {
        /// Eval output directories.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Directory for comparison.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match commands::execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
