//! `ser`: extraction, training, prediction and experiment drivers for
//! spontaneity-aware speech emotion recognition.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{FileConfig, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ser", version, about = "Spontaneity-aware speech emotion recognition")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; overrides the configuration file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract pooled features for every utterance of a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        /// Feature cache CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write it to a model file.
    Train {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Spontaneity context length of the hierarchical model.
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long, value_enum, default_value_t = Part::All)]
        part: Part,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict every utterance; writes `utterance_id,emotion,spontaneity`.
    Predict {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Part::All)]
        part: Part,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions CSV against the manifest labels.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spontaneity accuracy across context lengths.
    Sweep {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_delimiter = ',')]
        ells: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spontaneity accuracy with descriptor groups removed.
    Ablate {
        #[command(flatten)]
        input: Input,
        /// Comma-separated descriptor groups forming one exclusion set; repeatable.
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Both)]
        mode: ModeArg,
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic corpus (WAV files plus manifest.csv).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n_dialogs: Option<usize>,
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        no_branch_divergence: bool,
    },
}

#[derive(Debug, Args)]
pub struct Input {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Feature cache; features are extracted on the fly when absent.
    #[arg(long)]
    pub features: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Baseline,
    Hierarchical,
    Joint,
}

/// Which side of the configured split to use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Part {
    All,
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    DropBaseAndDelta,
    DropBaseKeepDelta,
    Both,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] ser_core::Error),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path).map_err(CliError::Usage)?,
        None => FileConfig::default(),
    };
    file.resolve(cli.seed).map_err(CliError::Usage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve(&cli).and_then(|cfg| {
        println!("seed: {}", cfg.seed);
        commands::run(cli.command, cfg)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
