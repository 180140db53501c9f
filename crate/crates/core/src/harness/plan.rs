use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;
use crate::config::ConfigFile;
use crate::oracle::InstanceDims;
use crate::policy::PolicyKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
    SweepUsers,
    SweepChannels,
    Oracle,
    Fig2Demo,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Train => "train",
            Mode::Eval => "eval",
            Mode::SweepUsers => "sweep-users",
            Mode::SweepChannels => "sweep-channels",
            Mode::Oracle => "oracle",
            Mode::Fig2Demo => "fig2-demo",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Mode::Train, Mode::Eval, Mode::SweepUsers, Mode::SweepChannels, Mode::Oracle, Mode::Fig2Demo]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s:?}"))
    }
}

/// Everything one invocation does.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub mode: Mode,
    pub config: ConfigFile,
    /// User counts or channel counts for the sweep modes.
    pub sweep_values: Vec<usize>,
    pub seeds: Vec<u64>,
    pub policies: Vec<PolicyKind>,
    pub train_episodes: usize,
    pub eval_episodes: usize,
    /// Episodes between checkpoint writes during training.
    pub checkpoint_every: usize,
    /// Checkpoint file for train and eval; checkpoint directory for sweeps.
    pub checkpoint: Option<PathBuf>,
    /// Continue training from `checkpoint` if it exists.
    pub resume: bool,
    pub output_dir: PathBuf,
    pub workers: usize,
    /// Oracle mode: instance count and size.
    pub instances: usize,
    pub instance_dims: InstanceDims,
    pub svg: bool,
}

impl ExperimentPlan {
    pub fn new(mode: Mode, config: ConfigFile, output_dir: impl Into<PathBuf>) -> Self {
        let sweep_values = match mode {
            Mode::SweepUsers => vec![5, 10, 15, 20, 25],
            Mode::SweepChannels => vec![1, 2, 3, 4],
            _ => Vec::new(),
        };
        let policies = match mode {
            Mode::Train => vec![PolicyKind::LearnGdm],
            _ => PolicyKind::ALL.to_vec(),
        };
        Self {
            mode,
            seeds: vec![config.seed],
            config,
            sweep_values,
            policies,
            train_episodes: 2000,
            eval_episodes: 20,
            checkpoint_every: 100,
            checkpoint: None,
            resume: false,
            output_dir: output_dir.into(),
            workers: 1,
            instances: 50,
            instance_dims: InstanceDims::default(),
            svg: true,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Plan(m.to_string()));
        if self.seeds.is_empty() {
            return bad("at least one seed is required");
        }
        if self.policies.is_empty() {
            return bad("at least one policy is required");
        }
        if matches!(self.mode, Mode::SweepUsers | Mode::SweepChannels) {
            if self.sweep_values.is_empty() {
                return bad("a sweep needs at least one value");
            }
            if self.sweep_values.contains(&0) {
                return bad("sweep values must be positive");
            }
        }
        if self.mode == Mode::Train && self.policies.iter().any(|p| !p.is_learning()) {
            return bad("only learning policies can be trained");
        }
        if self.checkpoint_every == 0 || self.workers == 0 {
            return bad("checkpoint interval and worker count must be positive");
        }
        Ok(())
    }

    /// Configuration of one sweep point for one seed.
    pub fn point_config(&self, value: Option<usize>, seed: u64) -> ConfigFile {
        let mut cfg = self.config.clone();
        cfg.seed = seed;
        match (self.mode, value) {
            (Mode::SweepUsers, Some(v)) => cfg.users.count = v,
            (Mode::SweepChannels, Some(v)) => cfg.access.channels = v,
            _ => {}
        }
        cfg
    }

    pub fn sweep_name(&self) -> &'static str {
        match self.mode {
            Mode::SweepUsers => "users",
            Mode::SweepChannels => "channels",
            other => other.name(),
        }
    }
}
