//! TOML configuration covering the world, the episode and the agent.
//!
//! Every section is optional and falls back to the defaults below; unknown
//! keys are rejected.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::AgentConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parsing config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell_size_m: f64,
    /// Base stations placed on evenly spaced cells; one per cell by default.
    pub node_count: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 4,
            cols: 4,
            cell_size_m: 100.0,
            node_count: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NodeConfig {
    pub capacity_min: u32,
    pub capacity_max: u32,
    pub exec_cost_min: f64,
    pub exec_cost_max: f64,
    pub transfer_cost_per_hop: f64,
}

impl Default for NodeConfig {
    fn default() -> Self {
        Self {
            capacity_min: 1,
            capacity_max: 3,
            exec_cost_min: 1.0,
            exec_cost_max: 4.0,
            transfer_cost_per_hop: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub count: usize,
    pub max_blocks: usize,
    /// Saturation rate per service, cycled when shorter than `count`.
    pub saturation_rates: Vec<f64>,
    /// Optional file of tabulated curves (one line per service).
    pub quality_table_file: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            count: 3,
            max_blocks: 4,
            saturation_rates: vec![1.0, 0.6, 1.5],
            quality_table_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UserConfig {
    pub count: usize,
    pub threshold_min: f64,
    pub threshold_max: f64,
    pub speed_mps: f64,
    pub pause_s: f64,
}

impl Default for UserConfig {
    fn default() -> Self {
        Self {
            count: 15,
            threshold_min: 0.1,
            threshold_max: 0.5,
            speed_mps: 10.0,
            pause_s: 3.0,
        }
    }
}

/// Scope of the top-`C` channel rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AccessMode {
    /// Each base station grants its own channels.
    #[default]
    PerBs,
    /// One global ranking; the top `C` users network-wide transmit.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AccessConfig {
    pub channels: usize,
    pub mode: AccessMode,
}

impl Default for AccessConfig {
    fn default() -> Self {
        Self {
            channels: 2,
            mode: AccessMode::PerBs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    pub frames: usize,
    pub frame_duration_s: f64,
    /// Observation frames stacked per decision.
    pub history: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            frames: 40,
            frame_duration_s: 1.0,
            history: 3,
        }
    }
}

/// Everything needed to generate a world and run episodes in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub nodes: NodeConfig,
    pub services: ServiceConfig,
    pub users: UserConfig,
    pub access: AccessConfig,
    pub objective: ObjectiveConfig,
    pub episode: EpisodeConfig,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.to_string()));
        if self.grid.rows == 0 || self.grid.cols == 0 || !(self.grid.cell_size_m > 0.0) {
            return bad("grid must have positive extent");
        }
        if self.grid.node_count == 0 || self.grid.node_count > self.grid.rows * self.grid.cols {
            return bad("node_count must be between 1 and the number of grid cells");
        }
        if self.nodes.capacity_min == 0 || self.nodes.capacity_min > self.nodes.capacity_max {
            return bad("capacities need 1 <= capacity_min <= capacity_max");
        }
        if !(self.nodes.exec_cost_min >= 0.0) || self.nodes.exec_cost_min > self.nodes.exec_cost_max {
            return bad("execution costs need 0 <= exec_cost_min <= exec_cost_max");
        }
        if !(self.nodes.transfer_cost_per_hop >= 0.0) {
            return bad("transfer_cost_per_hop must be non-negative");
        }
        if self.services.count == 0 || self.services.max_blocks == 0 {
            return bad("need at least one service with at least one block");
        }
        if self.services.quality_table_file.is_none() && self.services.saturation_rates.is_empty() {
            return bad("saturation_rates must not be empty");
        }
        if self.users.count == 0 {
            return bad("need at least one user");
        }
        let th = (self.users.threshold_min, self.users.threshold_max);
        if !(0.0 <= th.0 && th.0 <= th.1 && th.1 <= 1.0) {
            return bad("thresholds need 0 <= threshold_min <= threshold_max <= 1");
        }
        if !(self.users.speed_mps >= 0.0) || !(self.users.pause_s >= 0.0) {
            return bad("speed and pause must be non-negative");
        }
        if !(self.objective.alpha >= 0.0) || !(self.objective.beta >= 0.0) {
            return bad("alpha and beta must be non-negative");
        }
        if self.episode.frames == 0 {
            return bad("episode length must be at least one frame");
        }
        if !(self.episode.frame_duration_s > 0.0) || self.episode.history == 0 {
            return bad("frame duration and history must be positive");
        }
        Ok(())
    }

    /// Pause length in whole frames.
    pub fn pause_frames(&self) -> u32 {
        (self.users.pause_s / self.episode.frame_duration_s).round() as u32
    }

    /// Distance covered per frame, in meters.
    pub fn step_distance(&self) -> f64 {
        self.users.speed_mps * self.episode.frame_duration_s
    }
}

/// Top-level layout of a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub seed: u64,
    pub grid: GridConfig,
    pub nodes: NodeConfig,
    pub services: ServiceConfig,
    pub users: UserConfig,
    pub access: AccessConfig,
    pub objective: ObjectiveConfig,
    pub episode: EpisodeConfig,
    pub agent: AgentConfig,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text)?;
        file.sim().validate()?;
        file.agent.validate().map_err(ConfigError::Invalid)?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut file = Self::parse(&text)?;
        // Relative curve files resolve against the config's directory.
        if let (Some(table), Some(dir)) = (&file.services.quality_table_file, path.parent()) {
            if table.is_relative() {
                file.services.quality_table_file = Some(dir.join(table));
            }
        }
        Ok(file)
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            seed: self.seed,
            grid: self.grid.clone(),
            nodes: self.nodes.clone(),
            services: self.services.clone(),
            users: self.users.clone(),
            access: self.access.clone(),
            objective: self.objective.clone(),
            episode: self.episode.clone(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
