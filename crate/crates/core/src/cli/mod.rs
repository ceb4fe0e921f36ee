//! Command-line front end: `run`, `ablate`, `predict` and `synth`.
//!
//! Exit codes: 0 success, 1 output I/O failure, 2 bad config, 3 bad data
//! (including schema mismatch), 4 training diverged.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::assl::AsslError;
use crate::data::{DataError, MissingPolicy};
use crate::persist::PersistError;
use crate::pipeline::PipelineError;
use crate::prm::PrmError;

pub use commands::{
    cmd_ablate, cmd_predict, cmd_run, cmd_synth, format_predictions, AblationRow, RunManifest, SeedRecord,
    ABLATION_VARIANTS,
};
pub use config::{AblationFlags, DataConfig, RunConfig, OUT_ENV};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Divergence(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
            CliError::Data(_) => "data",
            CliError::Divergence(_) => "divergence",
        }
    }

    /// One line for stderr: `error kind=<kind> reason="<message>"`, with
    /// absolute paths cut down to their file name.
    pub fn diagnostic(&self) -> String {
        let reason = redact_paths(&self.to_string()).replace('\\', "\\\\").replace('"', "\\\"");
        format!("error kind={} reason=\"{}\"", self.kind(), reason.replace('\n', " "))
    }

    pub(crate) fn io(what: impl std::fmt::Display, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{what}: {e}"))
    }
}

fn redact_paths(s: &str) -> String {
    s.split(' ')
        .map(|tok| {
            let body = tok.trim_end_matches([':', ',', ';', ')']);
            if body.len() > 1 && body.starts_with('/') {
                let name = body.rsplit('/').next().unwrap_or("");
                format!(".../{name}{}", &tok[body.len()..])
            } else {
                tok.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::InvalidConfig(m) => CliError::Config(m),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<PrmError> for CliError {
    fn from(e: PrmError) -> Self {
        match e {
            PrmError::InvalidConfig(m) => CliError::Config(m),
            PrmError::NonFinite(_) | PrmError::LossIncreased { .. } => CliError::Divergence(e.to_string()),
            PrmError::Data(d) => d.into(),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<AsslError> for CliError {
    fn from(e: AsslError) -> Self {
        match e {
            AsslError::InvalidConfig(m) => CliError::Config(m),
            AsslError::NonFinite { .. } => CliError::Divergence(e.to_string()),
            AsslError::Data(d) => d.into(),
            e => CliError::Data(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Data(e) => e.into(),
            PipelineError::Prm(e) => e.into(),
            PipelineError::Assl(e) => e.into(),
            PipelineError::Eval(e) => CliError::Data(e.to_string()),
        }
    }
}

impl From<PersistError> for CliError {
    fn from(e: PersistError) -> Self {
        match e {
            PersistError::Data(d) => d.into(),
            PersistError::Prm(e) => e.into(),
            PersistError::Assl(e) => e.into(),
            e => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "credit-assl", version, about = "Semi-supervised credit rating with a pseudo-labeling teacher and adversarial alignment")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train and evaluate the two-phase pipeline for every configured seed.
    Run {
        config: PathBuf,
        /// Output root (overrides `out_dir` and the environment).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run only this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare the plain model, a supervised network, the pipeline without
    /// the adversarial term and the full pipeline on identical splits.
    Ablate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print a rating and class probabilities for every row of a CSV file.
    Predict {
        model: PathBuf,
        csv: PathBuf,
        #[arg(long, value_enum, default_value = "reject")]
        missing: MissingArg,
    },
    /// Write a synthetic dataset (labeled.csv, unlabeled.csv,
    /// hidden_truth.csv) and exit.
    Synth {
        /// Config whose `[data.synth]` table is used; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the generator seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum MissingArg {
    Reject,
    MeanImpute,
}

impl From<MissingArg> for MissingPolicy {
    fn from(m: MissingArg) -> Self {
        match m {
            MissingArg::Reject => MissingPolicy::Reject,
            MissingArg::MeanImpute => MissingPolicy::MeanImpute,
        }
    }
}

/// Runs a parsed command, writing predictions to `stdout`.
pub fn dispatch(cli: Cli, stdout: &mut dyn std::io::Write) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let cfg = load_with_seed(&config, seed)?;
            let dir = cmd_run(&cfg, out.as_deref())?;
            writeln!(stdout, "{}", dir.display()).map_err(|e| CliError::io("stdout", e))
        }
        Command::Ablate { config, out, seed } => {
            let cfg = load_with_seed(&config, seed)?;
            let (dir, _) = cmd_ablate(&cfg, out.as_deref())?;
            let table = dir.join("ablation.txt");
            let text = std::fs::read_to_string(&table).map_err(|e| CliError::io(table.display(), e))?;
            write!(stdout, "{text}").map_err(|e| CliError::io("stdout", e))
        }
        Command::Predict { model, csv, missing } => cmd_predict(&model, &csv, missing.into(), stdout),
        Command::Synth { config, out, seed } => {
            let mut synth = match config {
                Some(p) => RunConfig::load(&p)?
                    .data
                    .synth
                    .ok_or_else(|| CliError::Config("config has no [data.synth] table".into()))?,
                None => Default::default(),
            };
            if let Some(s) = seed {
                synth.seed = s;
            }
            cmd_synth(&synth, &out)
        }
    }
}

fn load_with_seed(path: &std::path::Path, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    Ok(cfg)
}
