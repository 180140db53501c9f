//! Experiment orchestration: training and evaluation runs, the user and
//! channel sweeps, oracle comparisons, and CSV / SVG output.

mod metrics;
mod plan;
mod run;
mod svg;

use std::path::PathBuf;

pub use metrics::{aggregate, moving_average, write_csv, AggregateRow, MetricRow, OracleRow, AGGREGATE_COLUMNS, METRIC_COLUMNS};
pub use plan::{ExperimentPlan, Mode};
pub use run::{
    build_policy, evaluate_policy, execute, fan_out, new_agent, train_policy, RunReport, World, EVAL_EPISODE_OFFSET,
};
pub use svg::{line_chart, Series};

use crate::agent::CheckpointError;
use crate::config::ConfigError;
use crate::nn::NnError;
use crate::oracle::OracleError;
use crate::scenario::ScenarioError;
use crate::sim::SimError;
use crate::trace::TraceError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error("no metrics to write to {0}")]
    EmptyMetrics(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl HarnessError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

#[cfg(test)]
mod tests;
