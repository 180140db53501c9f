use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use super::HarnessError;
use crate::sim::EpisodeMetrics;

/// Column order of per-episode metric files.
pub const METRIC_COLUMNS: [&str; 15] = [
    "run_id",
    "seed",
    "policy",
    "sweep_value",
    "episode",
    "reward",
    "loss",
    "epsilon",
    "quality_gated",
    "quality_ungated",
    "collisions",
    "objective_quality",
    "objective_execution",
    "objective_transfer",
    "objective_total",
];

/// Column order of aggregate files.
pub const AGGREGATE_COLUMNS: [&str; 15] = [
    "sweep",
    "value",
    "policy",
    "seed",
    "episodes",
    "reward_mean",
    "reward_std",
    "quality_gated_mean",
    "quality_gated_std",
    "quality_ungated_mean",
    "quality_ungated_std",
    "collisions_mean",
    "collisions_std",
    "objective_mean",
    "objective_std",
];

/// One episode of one run. Empty cells stand for values that do not apply:
/// no sweep, no training step, no exploration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub run_id: String,
    pub seed: u64,
    pub policy: String,
    pub sweep_value: Option<usize>,
    pub episode: usize,
    pub reward: f64,
    pub loss: Option<f64>,
    pub epsilon: Option<f64>,
    pub quality_gated: f64,
    pub quality_ungated: f64,
    pub collisions: usize,
    pub objective_quality: f64,
    pub objective_execution: f64,
    pub objective_transfer: f64,
    pub objective_total: f64,
    /// Seconds spent on the episode. Not written, so files stay
    /// byte-identical across repeated runs.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl MetricRow {
    pub fn from_episode(run_id: &str, seed: u64, policy: &str, sweep_value: Option<usize>, episode: usize, m: &EpisodeMetrics) -> Self {
        Self {
            run_id: run_id.to_string(),
            seed,
            policy: policy.to_string(),
            sweep_value,
            episode,
            reward: m.reward,
            loss: None,
            epsilon: None,
            quality_gated: m.quality_gated,
            quality_ungated: m.quality_ungated,
            collisions: m.collisions,
            objective_quality: m.objective.quality,
            objective_execution: m.objective.execution,
            objective_transfer: m.objective.transfer,
            objective_total: m.objective.total,
            wall_time_s: 0.0,
        }
    }
}

/// Mean and sample standard deviation over the episodes of one
/// (sweep value, policy, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub sweep: String,
    pub value: Option<usize>,
    pub policy: String,
    pub seed: u64,
    pub episodes: usize,
    pub reward_mean: f64,
    pub reward_std: f64,
    pub quality_gated_mean: f64,
    pub quality_gated_std: f64,
    pub quality_ungated_mean: f64,
    pub quality_ungated_std: f64,
    pub collisions_mean: f64,
    pub collisions_std: f64,
    pub objective_mean: f64,
    pub objective_std: f64,
}

/// Policy objective against the exact optimum on one small instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRow {
    pub instance: usize,
    pub seed: u64,
    pub policy: String,
    pub objective: f64,
    pub oracle_objective: f64,
    pub gap: f64,
    pub oracle_visits: u64,
    pub within_bound: bool,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Groups rows by sweep value, policy and seed, in that sort order.
pub fn aggregate(rows: &[MetricRow], sweep: &str) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(Option<usize>, &str, u64), Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.sweep_value, &r.policy, r.seed)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((value, policy, seed), rs)| {
            let stat = |f: fn(&MetricRow) -> f64| mean_std(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (reward_mean, reward_std) = stat(|r| r.reward);
            let (quality_gated_mean, quality_gated_std) = stat(|r| r.quality_gated);
            let (quality_ungated_mean, quality_ungated_std) = stat(|r| r.quality_ungated);
            let (collisions_mean, collisions_std) = stat(|r| r.collisions as f64);
            let (objective_mean, objective_std) = stat(|r| r.objective_total);
            AggregateRow {
                sweep: sweep.to_string(),
                value,
                policy: policy.to_string(),
                seed,
                episodes: rs.len(),
                reward_mean,
                reward_std,
                quality_gated_mean,
                quality_gated_std,
                quality_ungated_mean,
                quality_ungated_std,
                collisions_mean,
                collisions_std,
                objective_mean,
                objective_std,
            }
        })
        .collect()
}

/// Trailing mean over up to `window` values.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            if i >= window {
                sum -= values[i - window];
            }
            sum / (i + 1).min(window) as f64
        })
        .collect()
}

/// Writes `rows` with a header line. Refuses to create a file for an empty
/// slice.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::EmptyMetrics(path.to_path_buf()));
    }
    let mut out = csv::Writer::from_writer(Vec::new());
    for r in rows {
        out.serialize(r)?;
    }
    let bytes = out.into_inner().map_err(|e| HarnessError::io(path, e.into_error()))?;
    std::fs::write(path, bytes).map_err(|e| HarnessError::io(path, e))
}
