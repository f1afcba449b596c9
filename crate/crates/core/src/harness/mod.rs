//! Experiment configuration, orchestration and CSV output.

mod config;
mod metrics;
mod run;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{bundled, DeliveryMode, ExperimentConfig, Model, OptimizerSettings, ScalingSource, BUNDLED};
pub use metrics::{
    read_metrics, summarize_returns, trailing_averages, write_outputs, write_table, MetricsRecord, RunSummary, Variant,
    CURVE_HEADER, METRICS_HEADER, STALL_TOLERANCE, STALL_WINDOWS, SUMMARY_HEADER,
};
pub use run::{run_experiment, run_pair, summarize, EpisodeSpan, GateEvent, RunOutput, GATE_HEADER};

use crate::agents::AgentError;
use crate::federation::FederationError;
use crate::neuro::NeuroError;
use crate::ransim::RanError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] RanError),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Neuro(#[from] NeuroError),
    #[error("protocol violation: {0}")]
    Protocol(String),
}
