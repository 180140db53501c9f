//! Placement policies: the learned agent, its restricted variants and the
//! fixed baselines, behind one per-frame decision interface.
//!
//! Local action `0` is "no placement" (`∅`); local action `n + 1` places the
//! user's next block on node `n`.

use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;

use crate::agent::{D3qlAgent, Experience};
use crate::model::NodeId;

/// Per-user placement decisions for one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointAction(pub Vec<Option<NodeId>>);

impl JointAction {
    pub fn idle(users: usize) -> Self {
        Self(vec![None; users])
    }

    pub fn from_local(local: &[usize]) -> Self {
        Self(local.iter().map(|&a| a.checked_sub(1).map(NodeId)).collect())
    }

    pub fn to_local(&self) -> Vec<usize> {
        self.0.iter().map(|a| a.map_or(0, |n| n.0 + 1)).collect()
    }
}

/// Allowed local actions of one user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionMask(Vec<bool>);

impl ActionMask {
    pub fn all(nodes: usize) -> Self {
        Self(vec![true; nodes + 1])
    }

    pub fn idle_only(nodes: usize) -> Self {
        let mut m = vec![false; nodes + 1];
        m[0] = true;
        Self(m)
    }

    pub fn only(nodes: usize, allowed: &[Option<NodeId>]) -> Self {
        let mut m = vec![false; nodes + 1];
        for a in allowed {
            m[a.map_or(0, |n| n.0 + 1)] = true;
        }
        Self(m)
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn allows(&self, local: usize) -> bool {
        self.0.get(local).copied().unwrap_or(false)
    }

    pub fn allowed(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn intersect(&self, other: &ActionMask) -> ActionMask {
        let bits: Vec<bool> = self.0.iter().zip(&other.0).map(|(a, b)| *a && *b).collect();
        let mut out = ActionMask(bits);
        if out.is_empty() {
            out.0[0] = true;
        }
        out
    }
}

/// What a policy may know about a user's running chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionView {
    pub blocks_done: usize,
    pub max_blocks: usize,
    pub first_node: NodeId,
    pub current_node: NodeId,
    pub quality: f64,
}

/// Inputs available to a policy when it decides frame `frame`.
#[derive(Debug, Clone)]
pub struct DecisionView<'a> {
    pub frame: usize,
    pub node_count: usize,
    pub observation: &'a [f64],
    /// Actions with an effect this frame; everything else is a no-op.
    pub masks: &'a [ActionMask],
    pub sessions: &'a [Option<SessionView>],
    pub association: &'a [NodeId],
    pub pending_upload: &'a [bool],
}

pub trait PlacementPolicy {
    fn name(&self) -> &str;

    fn decide(&mut self, view: &DecisionView<'_>) -> JointAction;

    /// Reward of the previous decision and the view of the next frame, or
    /// `None` when the episode ended.
    fn feedback(&mut self, _reward: f64, _next: Option<&DecisionView<'_>>) {}
}

/// Restrictions defining the comparison methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Baseline {
    /// One node per inference: after the first block only that node or `∅`.
    Monolithic,
    /// Chains always run to full length once started.
    FixedChain,
    /// Every block on the user's current point of attachment.
    Greedy,
}

/// Restricts the effective mask of one user according to a baseline rule.
pub fn mask_for_baseline(
    kind: Baseline,
    base: &ActionMask,
    session: Option<&SessionView>,
    pending_upload: bool,
    poa: NodeId,
    nodes: usize,
) -> ActionMask {
    let in_flight = session.filter(|s| s.blocks_done < s.max_blocks);
    let rule = match kind {
        Baseline::Monolithic => match in_flight {
            Some(s) => ActionMask::only(nodes, &[None, Some(s.first_node)]),
            None => ActionMask::all(nodes),
        },
        Baseline::FixedChain => match in_flight {
            Some(s) if s.blocks_done > 0 => {
                let mut bits = vec![true; nodes + 1];
                bits[0] = false;
                ActionMask(bits)
            }
            _ => ActionMask::all(nodes),
        },
        Baseline::Greedy => {
            if in_flight.is_some() || (session.is_none() && pending_upload) {
                ActionMask::only(nodes, &[Some(poa)])
            } else {
                ActionMask::idle_only(nodes)
            }
        }
    };
    base.intersect(&rule)
}

fn baseline_masks(kind: Option<Baseline>, view: &DecisionView<'_>) -> Vec<ActionMask> {
    match kind {
        None => view.masks.to_vec(),
        Some(kind) => (0..view.masks.len())
            .map(|i| {
                mask_for_baseline(
                    kind,
                    &view.masks[i],
                    view.sessions[i].as_ref(),
                    view.pending_upload[i],
                    view.association[i],
                    view.node_count,
                )
            })
            .collect(),
    }
}

/// Places every block on the user's point of attachment and never stops a
/// chain early.
#[derive(Debug, Default)]
pub struct GreedyPolicy;

impl PlacementPolicy for GreedyPolicy {
    fn name(&self) -> &str {
        "gr"
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> JointAction {
        let masks = baseline_masks(Some(Baseline::Greedy), view);
        JointAction(
            masks
                .iter()
                .zip(view.association)
                .map(|(m, poa)| m.allows(poa.0 + 1).then_some(*poa))
                .collect(),
        )
    }
}

/// Uniform choice among effective actions.
#[derive(Debug)]
pub struct RandomPolicy {
    rng: ChaCha8Rng,
}

impl RandomPolicy {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Self { rng }
    }
}

impl PlacementPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> JointAction {
        let local: Vec<usize> = view
            .masks
            .iter()
            .map(|m| {
                let allowed: Vec<usize> = m.allowed().collect();
                *allowed.choose(&mut self.rng).unwrap_or(&0)
            })
            .collect();
        JointAction::from_local(&local)
    }
}

/// A D3QL agent acting under an optional baseline restriction, learning from
/// its own transitions when `training` is set.
pub struct LearningPolicy {
    name: String,
    pub agent: D3qlAgent,
    restriction: Option<Baseline>,
    training: bool,
    pending: Option<(Vec<f64>, Vec<usize>)>,
    losses: Vec<f64>,
}

impl LearningPolicy {
    pub fn new(kind: PolicyKind, agent: D3qlAgent, training: bool) -> Self {
        let restriction = match kind {
            PolicyKind::Monolithic => Some(Baseline::Monolithic),
            PolicyKind::FixedChain => Some(Baseline::FixedChain),
            _ => None,
        };
        Self {
            name: kind.to_string(),
            agent,
            restriction,
            training,
            pending: None,
            losses: Vec::new(),
        }
    }

    pub fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    /// Mean training loss since the last call, if any step ran.
    pub fn take_mean_loss(&mut self) -> Option<f64> {
        if self.losses.is_empty() {
            return None;
        }
        let mean = self.losses.iter().sum::<f64>() / self.losses.len() as f64;
        self.losses.clear();
        Some(mean)
    }
}

impl PlacementPolicy for LearningPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> JointAction {
        let masks = baseline_masks(self.restriction, view);
        let local = if self.training {
            self.agent.act(view.observation, &masks)
        } else {
            self.agent.act_greedy(view.observation, &masks)
        };
        if self.training {
            self.pending = Some((view.observation.to_vec(), local.clone()));
        }
        JointAction::from_local(&local)
    }

    fn feedback(&mut self, reward: f64, next: Option<&DecisionView<'_>>) {
        if !self.training {
            return;
        }
        let Some((obs, actions)) = self.pending.take() else {
            return;
        };
        let (next_obs, next_masks, terminal) = match next {
            Some(v) => (v.observation.to_vec(), baseline_masks(self.restriction, v), false),
            None => (vec![0.0; obs.len()], Vec::new(), true),
        };
        self.agent.remember(Experience {
            observation: obs,
            actions,
            reward,
            next_observation: next_obs,
            next_masks,
            terminal,
        });
        if let Some(loss) = self.agent.train_step() {
            self.losses.push(loss);
        }
        self.agent.sync_and_decay();
    }
}

/// Policy names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    LearnGdm,
    Monolithic,
    FixedChain,
    Greedy,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::LearnGdm,
        PolicyKind::Monolithic,
        PolicyKind::FixedChain,
        PolicyKind::Greedy,
        PolicyKind::Random,
    ];

    pub fn is_learning(self) -> bool {
        matches!(self, PolicyKind::LearnGdm | PolicyKind::Monolithic | PolicyKind::FixedChain)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::LearnGdm => "learn-gdm",
            PolicyKind::Monolithic => "mp",
            PolicyKind::FixedChain => "fp",
            PolicyKind::Greedy => "gr",
            PolicyKind::Random => "random",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| format!("unknown policy {s:?}; expected learn-gdm, mp, fp, gr or random"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn session(blocks_done: usize, first: usize) -> SessionView {
        SessionView {
            blocks_done,
            max_blocks: 4,
            first_node: NodeId(first),
            current_node: NodeId(first),
            quality: 0.5,
        }
    }

    fn allowed(m: &ActionMask) -> Vec<usize> {
        m.allowed().collect()
    }

    #[test]
    fn monolithic_sticks_to_first_node() {
        let base = ActionMask::all(3);
        let s = session(1, 1);
        let m = mask_for_baseline(Baseline::Monolithic, &base, Some(&s), false, NodeId(0), 3);
        assert_eq!(allowed(&m), vec![0, 2]);
    }

    #[test]
    fn fixed_chain_forbids_stopping_mid_chain() {
        let base = ActionMask::all(3);
        let s = session(2, 0);
        let m = mask_for_baseline(Baseline::FixedChain, &base, Some(&s), false, NodeId(0), 3);
        assert!(!m.allows(0));
        assert_eq!(allowed(&m), vec![1, 2, 3]);
    }

    #[test]
    fn greedy_idles_without_upload_or_session() {
        let base = ActionMask::idle_only(3);
        let m = mask_for_baseline(Baseline::Greedy, &base, None, false, NodeId(2), 3);
        assert_eq!(allowed(&m), vec![0]);
        let fresh = mask_for_baseline(Baseline::Greedy, &ActionMask::all(3), None, true, NodeId(2), 3);
        assert_eq!(allowed(&fresh), vec![3]);
    }

    #[test]
    fn greedy_policy_targets_poa() {
        let masks = vec![ActionMask::all(2), ActionMask::idle_only(2)];
        let sessions = vec![None, None];
        let view = DecisionView {
            frame: 1,
            node_count: 2,
            observation: &[],
            masks: &masks,
            sessions: &sessions,
            association: &[NodeId(1), NodeId(0)],
            pending_upload: &[true, false],
        };
        assert_eq!(GreedyPolicy.decide(&view), JointAction(vec![Some(NodeId(1)), None]));
    }

    #[test]
    fn random_policy_is_reproducible_and_masked() {
        let masks = vec![ActionMask::all(4), ActionMask::idle_only(4), ActionMask::only(4, &[Some(NodeId(2))])];
        let sessions = vec![None; 3];
        let view = DecisionView {
            frame: 0,
            node_count: 4,
            observation: &[],
            masks: &masks,
            sessions: &sessions,
            association: &[NodeId(0); 3],
            pending_upload: &[true, false, true],
        };
        let run = || {
            let mut p = RandomPolicy::new(ChaCha8Rng::seed_from_u64(5));
            (0..20).map(|_| p.decide(&view)).collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        for act in &a {
            assert_eq!(act.0[1], None);
            assert_eq!(act.0[2], Some(NodeId(2)));
        }
    }

    #[test]
    fn policy_names_parse() {
        for k in PolicyKind::ALL {
            assert_eq!(k.to_string().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("opt".parse::<PolicyKind>().is_err());
    }

    #[test]
    fn local_action_encoding() {
        let a = JointAction::from_local(&[0, 1, 3]);
        assert_eq!(a.0, vec![None, Some(NodeId(0)), Some(NodeId(2))]);
        assert_eq!(a.to_local(), vec![0, 1, 3]);
    }
}
