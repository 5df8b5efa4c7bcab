//! Batch front-end for the shadow-rate pipeline.
//!
//! Each subcommand is a plain function taking a [`RunConfig`] so that the
//! binary and the integration tests drive exactly the same code. Every
//! command writes flat CSV/JSON files into the output directory and records
//! their SHA-256 digests in `manifest.json`.

pub mod build;
pub mod config;
pub mod manifest;
pub mod models;
pub mod panel_file;
pub mod regress;
pub mod summary;
pub mod synth;
pub mod var;

use std::path::PathBuf;

use shadowfx_core::econometrics::EconError;
use shadowfx_core::ingest::IngestError;
use shadowfx_core::pricing::PanelReadError;
use shadowfx_core::regulation::RegulationError;
use shadowfx_core::synth::SynthError;
use thiserror::Error;

pub use build::{cmd_build, cmd_quantile_bounds, BuildSummary, QuantileReport};
pub use config::{RunConfig, CONFIG_KEYS};
pub use manifest::{digest_hex, Manifest, RunRecord};
pub use models::{model_help, ModelId, MODELS};
pub use regress::{cmd_regress, run_regression, RegressionReport};
pub use summary::{cmd_summary, summarize, PanelSummary, PremiumStats};
pub use synth::{cmd_synth, SynthSummary};
pub use var::{cmd_var, run_var, Group, VarReport};

/// Process exit status for a successful run.
pub const EXIT_OK: i32 = 0;
/// Unreadable, malformed or inconsistent input (including config).
pub const EXIT_INPUT: i32 = 2;
/// Estimation failure: missing columns, identification, conditioning.
pub const EXIT_MODEL: i32 = 3;
/// Rejected-row share above the configured threshold.
pub const EXIT_THRESHOLD: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{input}: {source}")]
    Ingest {
        input: String,
        #[source]
        source: IngestError,
    },
    #[error("no trade data in {0}")]
    NoTradeData(PathBuf),
    #[error(
        "{input}: {rejected} of {rows} rows rejected ({rate:.4}), above threshold {threshold}; report at {report}",
        report = .report.display()
    )]
    Threshold {
        input: String,
        rejected: usize,
        rows: usize,
        rate: f64,
        threshold: f64,
        report: PathBuf,
    },
    #[error("regulatory indices: {0}")]
    Regulation(#[from] RegulationError),
    #[error("panel file {path}: {source}")]
    Panel {
        path: PathBuf,
        #[source]
        source: PanelReadError,
    },
    #[error("model error: {0}")]
    Model(#[from] EconError),
    #[error("group `{0}` has no observations")]
    EmptyGroup(String),
    #[error("synthetic spec: {0}")]
    Synth(#[from] SynthError),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Threshold { .. } => EXIT_THRESHOLD,
            CliError::Model(_) | CliError::EmptyGroup(_) => EXIT_MODEL,
            _ => EXIT_INPUT,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
