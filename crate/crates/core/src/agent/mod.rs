//! Double + dueling deep Q-learning over a factored action space: one head
//! per user, `nodes + 1` local actions per head, a shared frame reward.

mod checkpoint;
mod memory;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use memory::{Experience, ReplayMemory};

use ndarray::{Array2, ArrayView1};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{NetworkSpec, NnError, Optimizer, OptimizerKind, QNetwork};
use crate::policy::ActionMask;
use crate::rng::{derive_seed, stream_rng, Stream};

/// How the stacked history enters the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// An LSTM unrolls over the history slots.
    #[default]
    Recurrent,
    /// The stack is read as one flat vector.
    Flattened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub memory_capacity: usize,
    /// Steps between copies of the online weights into the target network.
    pub target_sync_period: u64,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    pub epsilon_decay: f64,
    pub input_mode: InputMode,
    pub recurrent_width: usize,
    pub dense_widths: Vec<usize>,
    pub optimizer: OptimizerKind,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            learning_rate: 0.0008,
            batch_size: 32,
            memory_capacity: 5000,
            target_sync_period: 150,
            epsilon_start: 1.0,
            epsilon_floor: 0.00001,
            epsilon_decay: 0.99995,
            input_mode: InputMode::Recurrent,
            recurrent_width: 128,
            dense_widths: vec![128, 64, 32],
            optimizer: OptimizerKind::Sgd,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(format!("gamma {} must lie in [0, 1)", self.gamma));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return Err(format!("epsilon_decay {} must lie in (0, 1)", self.epsilon_decay));
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_floor) {
            return Err("epsilon values must lie in [0, 1]".into());
        }
        if self.learning_rate.is_nan() || self.learning_rate < 0.0 {
            return Err("learning_rate must be non-negative".into());
        }
        if self.target_sync_period == 0 || self.batch_size == 0 {
            return Err("target_sync_period and batch_size must be positive".into());
        }
        if self.memory_capacity < self.batch_size {
            return Err("memory_capacity must hold at least one batch".into());
        }
        if self.recurrent_width == 0 || self.dense_widths.contains(&0) {
            return Err("layer widths must be positive".into());
        }
        Ok(())
    }

    pub fn network_spec(&self, frame_width: usize, history: usize, heads: usize, actions: usize, seed: u64) -> NetworkSpec {
        NetworkSpec {
            frame_width,
            history,
            recurrent_width: (self.input_mode == InputMode::Recurrent).then_some(self.recurrent_width),
            dense_widths: self.dense_widths.clone(),
            heads,
            actions_per_head: actions,
            seed,
        }
    }
}

/// Allowed action with the largest value; ties go to the lowest index.
pub fn masked_argmax(q: ArrayView1<'_, f64>, mask: &ActionMask) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for a in mask.allowed() {
        if best.is_none_or(|(_, v)| q[a] > v) {
            best = Some((a, q[a]));
        }
    }
    best.map_or(0, |(a, _)| a)
}

fn head(row: ArrayView1<'_, f64>, h: usize, actions: usize) -> ArrayView1<'_, f64> {
    row.slice_move(ndarray::s![h * actions..(h + 1) * actions])
}

/// Per-head targets `ρ + γ Q⁻(O', argmax_a Q(O', a))`: the online network
/// picks the action, the target network values it.
pub fn double_q_target(
    reward: f64,
    gamma: f64,
    terminal: bool,
    online_next: ArrayView1<'_, f64>,
    target_next: ArrayView1<'_, f64>,
    masks: &[ActionMask],
) -> Vec<f64> {
    if terminal {
        return vec![reward; masks.len()];
    }
    let actions = online_next.len() / masks.len();
    masks
        .iter()
        .enumerate()
        .map(|(h, m)| {
            let a = masked_argmax(head(online_next, h, actions), m);
            reward + gamma * head(target_next, h, actions)[a]
        })
        .collect()
}

/// Per-head targets of plain deep Q-learning: the target network both picks
/// and values the action.
pub fn plain_q_target(reward: f64, gamma: f64, terminal: bool, target_next: ArrayView1<'_, f64>, masks: &[ActionMask]) -> Vec<f64> {
    double_q_target(reward, gamma, terminal, target_next, target_next, masks)
}

/// Epsilon-greedy joint action: one uniform draw decides whether every head
/// explores (uniform over its mask) or exploits (masked argmax).
pub fn select_action<R: Rng + ?Sized>(
    net: &QNetwork,
    observation: &[f64],
    masks: &[ActionMask],
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<usize>, NnError> {
    let zeta: f64 = rng.random();
    if zeta < epsilon {
        return Ok(masks
            .iter()
            .map(|m| {
                let allowed: Vec<usize> = m.allowed().collect();
                *allowed.choose(rng).unwrap_or(&0)
            })
            .collect());
    }
    greedy_action(net, observation, masks)
}

pub fn greedy_action(net: &QNetwork, observation: &[f64], masks: &[ActionMask]) -> Result<Vec<usize>, NnError> {
    let input = ArrayView1::from(observation).insert_axis(ndarray::Axis(0));
    let q = net.q_values(&input)?;
    let actions = net.spec().actions_per_head;
    Ok(masks
        .iter()
        .enumerate()
        .map(|(h, m)| masked_argmax(head(q.row(0), h, actions), m))
        .collect())
}

/// Online and target networks, replay memory and exploration state.
#[derive(Debug, Clone)]
pub struct D3qlAgent {
    pub config: AgentConfig,
    pub online: QNetwork,
    pub target: QNetwork,
    pub optimizer: Optimizer,
    pub memory: ReplayMemory,
    pub epsilon: f64,
    /// Calls to [`D3qlAgent::sync_and_decay`], one per frame.
    pub steps: u64,
    /// Gradient updates performed.
    pub updates: u64,
    /// Master seed the exploration and replay streams derive from.
    pub seed: u64,
    explore_rng: ChaCha8Rng,
    replay_rng: ChaCha8Rng,
}

impl D3qlAgent {
    pub fn new(config: AgentConfig, spec_shape: (usize, usize, usize, usize), seed: u64) -> Result<Self, NnError> {
        let (frame_width, history, heads, actions) = spec_shape;
        config.validate().map_err(NnError::InvalidSpec)?;
        let spec = config.network_spec(frame_width, history, heads, actions, derive_seed(seed, Stream::Network, 0));
        let online = QNetwork::new(spec)?;
        Ok(Self::from_parts(config, online.clone(), online, None, 0, 0, None, seed))
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        config: AgentConfig,
        online: QNetwork,
        target: QNetwork,
        optimizer: Option<Optimizer>,
        steps: u64,
        updates: u64,
        epsilon: Option<f64>,
        seed: u64,
    ) -> Self {
        let optimizer = optimizer.unwrap_or_else(|| Optimizer::new(config.optimizer, online.spec().parameter_count()));
        Self {
            epsilon: epsilon.unwrap_or(config.epsilon_start),
            memory: ReplayMemory::new(config.memory_capacity),
            explore_rng: stream_rng(seed, Stream::Exploration, steps),
            replay_rng: stream_rng(seed, Stream::Replay, steps),
            config,
            online,
            target,
            optimizer,
            steps,
            updates,
            seed,
        }
    }

    pub fn act(&mut self, observation: &[f64], masks: &[ActionMask]) -> Vec<usize> {
        select_action(&self.online, observation, masks, self.epsilon, &mut self.explore_rng).expect("observation width matches the network")
    }

    pub fn act_greedy(&self, observation: &[f64], masks: &[ActionMask]) -> Vec<usize> {
        greedy_action(&self.online, observation, masks).expect("observation width matches the network")
    }

    pub fn remember(&mut self, experience: Experience) {
        self.memory.push(experience);
    }

    /// One gradient step on a sampled batch; `None` while the memory holds
    /// fewer experiences than a batch.
    pub fn train_step(&mut self) -> Option<f64> {
        let batch_size = self.config.batch_size;
        if self.memory.len() < batch_size {
            return None;
        }
        let batch = self.memory.sample(batch_size, &mut self.replay_rng);
        let width = self.online.spec().input_width();
        let mut x = Array2::zeros((batch_size, width));
        let mut xn = Array2::zeros((batch_size, width));
        for (b, e) in batch.iter().enumerate() {
            x.row_mut(b).assign(&ArrayView1::from(&e.observation[..]));
            xn.row_mut(b).assign(&ArrayView1::from(&e.next_observation[..]));
        }
        let cache = self.online.forward(&x.view()).expect("batch width");
        let q = cache.q_values(self.online.spec());
        let q_next_online = self.online.q_values(&xn.view()).expect("batch width");
        let q_next_target = self.target.q_values(&xn.view()).expect("batch width");

        let spec = self.online.spec();
        let (heads, actions) = (spec.heads, spec.actions_per_head);
        let scale = 1.0 / (batch_size * heads) as f64;
        let mut d_q = Array2::zeros(q.raw_dim());
        let mut loss = 0.0;
        for (b, e) in batch.iter().enumerate() {
            let targets = if e.terminal {
                vec![e.reward; heads]
            } else {
                double_q_target(
                    e.reward,
                    self.config.gamma,
                    false,
                    q_next_online.row(b),
                    q_next_target.row(b),
                    &e.next_masks,
                )
            };
            for (h, y) in targets.into_iter().enumerate() {
                let col = h * actions + e.actions[h];
                let diff = q[[b, col]] - y;
                loss += diff * diff;
                d_q[[b, col]] = 2.0 * diff * scale;
            }
        }
        let grad = self.online.backward(&x.view(), &cache, &d_q.view());
        self.optimizer.apply(&mut self.online, &grad, self.config.learning_rate);
        self.updates += 1;
        Some(loss * scale)
    }

    /// Advances the step counter, copies the online weights into the target
    /// network every `target_sync_period` steps and decays epsilon.
    pub fn sync_and_decay(&mut self) {
        self.steps += 1;
        if self.steps.is_multiple_of(self.config.target_sync_period) {
            self.target = self.online.clone();
        }
        self.epsilon = (self.epsilon * self.config.epsilon_decay).max(self.config.epsilon_floor);
    }
}

#[cfg(test)]
mod tests;
