//! The discrete-time world.
//!
//! Each frame runs, in order: mobility, channel access, observation,
//! placement (users in access-priority order), reward. A session that starts
//! at frame `t` and runs `k` blocks is delivered at frame `t + k`, where the
//! tail transfer to the user's point of attachment is paid.

mod channel;
mod fig2;
mod mobility;
mod observe;

pub use channel::{apply_channel_grants, UplinkOutcome};
pub use fig2::{fig2_instance, run_fig2, Fig2Demo, ScriptedPolicy};
pub use mobility::{associate, MobilityModel, Point, WaypointParams, Walker};
pub use observe::{encode_frame, frame_width, observation_width, FrameFeatures, History};

use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::SimConfig;
use crate::mac::{compute_priorities, priority_order, AccessContext, AccessScheduler};
use crate::model::{ExecutionPath, NodeId};
use crate::oracle::{objective_value, ObjectiveBreakdown};
use crate::policy::{ActionMask, DecisionView, PlacementPolicy, SessionView};
use crate::scenario::Scenario;
use crate::trace::{DecisionTrace, EventKind, Execution, Instance, Selection, TraceEvent, Transmission};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("policy returned {found} actions for {expected} users")]
    ActionCount { expected: usize, found: usize },
    #[error("action for user {ue} names node {node}, only {nodes} nodes exist")]
    InvalidNode { ue: usize, node: usize, nodes: usize },
    #[error("mobility script covers {found} frames, episode needs {expected}")]
    ScriptTooShort { expected: usize, found: usize },
    #[error("invalid episode: {0}")]
    Invalid(String),
}

/// Why a session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloseReason {
    /// All blocks of the service ran.
    Completed,
    /// The policy chose `∅`.
    Stopped,
    /// The chosen node was full this frame.
    CapacityExhausted,
    /// The episode ended mid-chain.
    Horizon,
}

#[derive(Debug, Clone)]
struct Session {
    start_frame: usize,
    path: ExecutionPath,
    quality: f64,
    transfer_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionRecord {
    pub ue: usize,
    pub start_frame: usize,
    pub close_frame: usize,
    pub path: ExecutionPath,
    pub quality: f64,
    pub transfer_cost: f64,
    pub reason: CloseReason,
    /// Quality cleared the threshold, so the chain counts as a selected path.
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameOutcome {
    pub frame: usize,
    pub grants: Vec<Option<usize>>,
    pub uploads: Vec<bool>,
    pub collisions: usize,
    /// `W_n`: blocks run on each node.
    pub executions: Vec<u32>,
    pub deliveries: Vec<(usize, f64)>,
    pub quality_gain: f64,
    pub exec_cost: f64,
    pub transfer_cost: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeMetrics {
    pub reward: f64,
    /// Delivered quality per user, counting only results above threshold.
    pub quality_gated: f64,
    /// Delivered quality per user, counting every closed session.
    pub quality_ungated: f64,
    pub sessions: usize,
    pub selections: usize,
    pub uploads: usize,
    pub collisions: usize,
    pub objective: ObjectiveBreakdown,
}

#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub instance: Instance,
    pub trace: DecisionTrace,
    pub events: Vec<TraceEvent>,
    pub frames: Vec<FrameOutcome>,
    pub sessions: Vec<SessionRecord>,
    pub metrics: EpisodeMetrics,
}

#[derive(Debug, Clone)]
pub struct EpisodeSpec {
    pub frames: usize,
    pub history: usize,
    pub mobility: MobilityModel,
}

impl EpisodeSpec {
    /// Random-waypoint episode with the configured length, history and speed.
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            frames: cfg.episode.frames,
            history: cfg.episode.history,
            mobility: MobilityModel::RandomWaypoint(WaypointParams {
                step_distance: cfg.step_distance(),
                pause_frames: cfg.pause_frames(),
            }),
        }
    }
}

/// Allowed actions that change anything this frame: a fresh upload may start
/// a chain, a running chain may continue, everything else idles.
pub fn effective_mask(session: Option<&SessionView>, pending_upload: bool, nodes: usize) -> ActionMask {
    match session {
        Some(s) if s.blocks_done < s.max_blocks => ActionMask::all(nodes),
        Some(_) => ActionMask::idle_only(nodes),
        None if pending_upload => ActionMask::all(nodes),
        None => ActionMask::idle_only(nodes),
    }
}

/// Quality credit of one block: the increase counts only once the
/// threshold is reached.
pub fn gated_gain(before: f64, after: f64, threshold: f64) -> f64 {
    if after >= threshold {
        after - before
    } else {
        0.0
    }
}

/// Frame reward from its gated quality gain, `Σ ε_n W_n` and the transfer
/// cost incurred in the frame.
pub fn compute_reward(quality_gain: f64, exec_cost: f64, transfer_cost: f64, alpha: f64, beta: f64) -> f64 {
    quality_gain - alpha * exec_cost - beta * transfer_cost
}

/// Runs one episode to the horizon.
pub fn run_episode(
    scenario: &Scenario,
    spec: &EpisodeSpec,
    mac: &mut dyn AccessScheduler,
    policy: &mut dyn PlacementPolicy,
    rng: &mut ChaCha8Rng,
) -> Result<EpisodeResult, SimError> {
    Episode::new(scenario, spec, rng)?.run(mac, policy)
}

struct Episode<'a> {
    scenario: &'a Scenario,
    spec: &'a EpisodeSpec,
    rng: &'a mut ChaCha8Rng,
    walkers: Vec<Walker>,
    association: Vec<NodeId>,
    sessions: Vec<Option<Session>>,
    pending: Vec<bool>,
    prev_load: Vec<u32>,
    history: History,
    association_log: Vec<Vec<NodeId>>,
    trace: DecisionTrace,
    events: Vec<TraceEvent>,
    records: Vec<SessionRecord>,
}

impl<'a> Episode<'a> {
    fn new(scenario: &'a Scenario, spec: &'a EpisodeSpec, rng: &'a mut ChaCha8Rng) -> Result<Self, SimError> {
        if spec.frames == 0 || spec.history == 0 {
            return Err(SimError::Invalid("frames and history must be positive".into()));
        }
        let users = scenario.ue_count();
        let nodes = scenario.node_count();
        let grid = *scenario.topology.grid();
        let (walkers, association) = match &spec.mobility {
            MobilityModel::RandomWaypoint(_) => {
                let walkers: Vec<Walker> = (0..users).map(|_| Walker::spawn(&grid, &mut *rng)).collect();
                let assoc = associate(&scenario.topology, &walkers);
                (walkers, assoc)
            }
            MobilityModel::Scripted(rows) => {
                if rows.len() < spec.frames {
                    return Err(SimError::ScriptTooShort {
                        expected: spec.frames,
                        found: rows.len(),
                    });
                }
                for row in rows {
                    if row.len() != users || row.iter().any(|n| n.0 >= nodes) {
                        return Err(SimError::Invalid("scripted association row does not fit the scenario".into()));
                    }
                }
                (Vec::new(), rows[0].clone())
            }
        };
        Ok(Self {
            scenario,
            spec,
            rng,
            walkers,
            association,
            sessions: vec![None; users],
            pending: vec![false; users],
            prev_load: vec![0; nodes],
            history: History::new(frame_width(nodes, users), spec.history),
            association_log: Vec::with_capacity(spec.frames),
            trace: DecisionTrace::empty(spec.frames),
            events: Vec::new(),
            records: Vec::new(),
        })
    }

    fn move_users(&mut self, frame: usize) {
        if frame == 0 {
            return;
        }
        match &self.spec.mobility {
            MobilityModel::RandomWaypoint(params) => {
                let grid = *self.scenario.topology.grid();
                for w in &mut self.walkers {
                    w.step(params, &grid, &mut *self.rng);
                }
                self.association = associate(&self.scenario.topology, &self.walkers);
            }
            MobilityModel::Scripted(rows) => self.association = rows[frame].clone(),
        }
    }

    fn session_views(&self) -> Vec<Option<SessionView>> {
        self.sessions
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.as_ref().map(|s| SessionView {
                    blocks_done: s.path.len(),
                    max_blocks: self.scenario.service_of(i).max_blocks(),
                    first_node: s.path.first(),
                    current_node: s.path.last(),
                    quality: s.quality,
                })
            })
            .collect()
    }

    fn run(mut self, mac: &mut dyn AccessScheduler, policy: &mut dyn PlacementPolicy) -> Result<EpisodeResult, SimError> {
        let mut frames = Vec::with_capacity(self.spec.frames);
        let mut last_reward = None;
        for t in 0..self.spec.frames {
            let outcome = self.frame(t, mac, policy, last_reward)?;
            last_reward = Some(outcome.reward);
            frames.push(outcome);
        }
        if let Some(r) = last_reward {
            policy.feedback(r, None);
        }
        for ue in 0..self.sessions.len() {
            if self.sessions[ue].is_some() {
                self.close(ue, self.spec.frames, CloseReason::Horizon, 0.0);
            }
        }
        Ok(self.finish(frames))
    }

    fn frame(
        &mut self,
        t: usize,
        mac: &mut dyn AccessScheduler,
        policy: &mut dyn PlacementPolicy,
        last_reward: Option<f64>,
    ) -> Result<FrameOutcome, SimError> {
        let sc = self.scenario;
        let users = sc.ue_count();
        let nodes = sc.node_count();
        self.move_users(t);
        self.association_log.push(self.association.clone());

        // Channel access.
        let qualities: Vec<f64> = self.sessions.iter().map(|s| s.as_ref().map_or(0.0, |s| s.quality)).collect();
        let thresholds: Vec<f64> = sc.ues.iter().map(|u| u.threshold).collect();
        let priorities = compute_priorities(&qualities, &thresholds);
        let eligible: Vec<bool> = (0..users).map(|i| self.sessions[i].is_none() && !self.pending[i]).collect();
        let grants = mac.grant(
            t,
            &AccessContext {
                priorities: &priorities,
                association: &self.association,
                eligible: &eligible,
                channels: sc.channels,
            },
        );
        let uplink = apply_channel_grants(&grants, &self.association);
        for (ue, grant) in grants.iter().enumerate() {
            if let Some(ch) = *grant {
                if uplink.success[ue] {
                    self.trace.transmissions.push(Transmission { frame: t, ue, channel: ch });
                    self.events.push(TraceEvent {
                        node: Some(self.association[ue]),
                        channel: Some(ch),
                        ..TraceEvent::new(t, Some(ue), EventKind::Upload)
                    });
                } else {
                    self.events.push(TraceEvent {
                        node: Some(self.association[ue]),
                        channel: Some(ch),
                        ..TraceEvent::new(t, Some(ue), EventKind::Collision)
                    });
                }
            }
        }

        // Observation and decision.
        let load_ratio: Vec<f64> = self
            .prev_load
            .iter()
            .zip(sc.topology.nodes())
            .map(|(&w, n)| f64::from(w) / f64::from(n.capacity))
            .collect();
        let exec_cost: Vec<f64> = sc.topology.nodes().iter().map(|n| n.exec_cost).collect();
        let gaps: Vec<f64> = qualities.iter().zip(&thresholds).map(|(q, th)| q - th).collect();
        self.history.push(encode_frame(&FrameFeatures {
            load_ratio: &load_ratio,
            exec_cost: &exec_cost,
            quality_gap: &gaps,
            uploaded: &self.pending,
            association: &self.association,
        }));
        let observation = self.history.stacked();
        let views = self.session_views();
        let masks: Vec<ActionMask> = (0..users)
            .map(|i| effective_mask(views[i].as_ref(), self.pending[i], nodes))
            .collect();
        let view = DecisionView {
            frame: t,
            node_count: nodes,
            observation: &observation,
            masks: &masks,
            sessions: &views,
            association: &self.association,
            pending_upload: &self.pending,
        };
        if let Some(r) = last_reward {
            policy.feedback(r, Some(&view));
        }
        let action = policy.decide(&view);
        if action.0.len() != users {
            return Err(SimError::ActionCount {
                expected: users,
                found: action.0.len(),
            });
        }
        for (ue, a) in action.0.iter().enumerate() {
            if let Some(n) = a {
                if n.0 >= nodes {
                    return Err(SimError::InvalidNode { ue, node: n.0, nodes });
                }
            }
        }

        // Placement in priority order.
        let mut load = vec![0u32; nodes];
        let mut quality_gain = 0.0;
        let mut transfer = 0.0;
        let mut deliveries = Vec::new();
        for ue in priority_order(&priorities) {
            let service = sc.service_of(ue);
            let threshold = thresholds[ue];
            let target = action.0[ue];
            let fits = |n: NodeId, load: &[u32]| load[n.0] < sc.topology.nodes()[n.0].capacity;
            match self.sessions[ue].as_mut() {
                Some(s) if s.path.len() == service.max_blocks() => {
                    let tail = sc.topology.transfer(s.path.last(), self.association[ue]);
                    transfer += tail;
                    deliveries.push((ue, s.quality));
                    self.close(ue, t, CloseReason::Completed, tail);
                }
                Some(s) => match target {
                    Some(n) if fits(n, &load) => {
                        load[n.0] += 1;
                        let hop = sc.topology.transfer(s.path.last(), n);
                        s.path.push(n);
                        s.transfer_cost += hop;
                        transfer += hop;
                        let block = s.path.len();
                        let q = service.quality(block).expect("block within service");
                        quality_gain += gated_gain(s.quality, q, threshold);
                        s.quality = q;
                        self.trace.executions.push(Execution { frame: t, ue, block, node: n });
                        self.events.push(TraceEvent {
                            node: Some(n),
                            block: Some(block),
                            quality: Some(q),
                            cost: Some(hop),
                            ..TraceEvent::new(t, Some(ue), EventKind::Exec)
                        });
                    }
                    _ => {
                        let tail = sc.topology.transfer(s.path.last(), self.association[ue]);
                        transfer += tail;
                        deliveries.push((ue, s.quality));
                        let reason = if target.is_some() {
                            CloseReason::CapacityExhausted
                        } else {
                            CloseReason::Stopped
                        };
                        self.close(ue, t, reason, tail);
                    }
                },
                None => {
                    let Some(n) = target else { continue };
                    if !self.pending[ue] || !fits(n, &load) {
                        continue;
                    }
                    load[n.0] += 1;
                    let request_poa = self.association_log[t - 1][ue];
                    let head = sc.topology.transfer(request_poa, n);
                    transfer += head;
                    let q = service.quality(1).expect("service has a block");
                    quality_gain += gated_gain(0.0, q, threshold);
                    self.sessions[ue] = Some(Session {
                        start_frame: t,
                        path: ExecutionPath::new(vec![n]).expect("non-empty"),
                        quality: q,
                        transfer_cost: head,
                    });
                    self.trace.executions.push(Execution { frame: t, ue, block: 1, node: n });
                    self.events.push(TraceEvent {
                        node: Some(n),
                        block: Some(1),
                        quality: Some(q),
                        cost: Some(head),
                        ..TraceEvent::new(t, Some(ue), EventKind::Exec)
                    });
                }
            }
        }

        let exec_cost_sum: f64 = load.iter().zip(&exec_cost).map(|(&w, e)| f64::from(w) * e).sum();
        let reward = compute_reward(quality_gain, exec_cost_sum, transfer, sc.alpha, sc.beta);
        self.pending = uplink.success.clone();
        self.prev_load = load.clone();
        Ok(FrameOutcome {
            frame: t,
            grants,
            uploads: uplink.success,
            collisions: uplink.collisions,
            executions: load,
            deliveries,
            quality_gain,
            exec_cost: exec_cost_sum,
            transfer_cost: transfer,
            reward,
        })
    }

    /// Ends the user's session at `frame`, mapping it to a selected path if
    /// its quality clears the threshold.
    fn close(&mut self, ue: usize, frame: usize, reason: CloseReason, tail: f64) {
        let s = self.sessions[ue].take().expect("open session");
        let selected = s.quality >= self.scenario.ues[ue].threshold;
        if reason != CloseReason::Horizon {
            self.events.push(TraceEvent {
                node: Some(self.association[ue]),
                path: Some(s.path.clone()),
                quality: Some(s.quality),
                cost: Some(tail),
                ..TraceEvent::new(frame, Some(ue), EventKind::Deliver)
            });
        }
        let kind = if selected { EventKind::Select } else { EventKind::Discard };
        self.events.push(TraceEvent {
            node: Some(s.path.first()),
            path: Some(s.path.clone()),
            quality: Some(s.quality),
            ..TraceEvent::new(s.start_frame, Some(ue), kind)
        });
        if selected {
            self.trace.selections.push(Selection {
                frame: s.start_frame,
                ue,
                path: s.path.clone(),
            });
        }
        self.records.push(SessionRecord {
            ue,
            start_frame: s.start_frame,
            close_frame: frame,
            path: s.path,
            quality: s.quality,
            transfer_cost: s.transfer_cost + tail,
            reason,
            selected,
        });
    }

    fn finish(mut self, frames: Vec<FrameOutcome>) -> EpisodeResult {
        let users = self.scenario.ue_count() as f64;
        self.trace.canonicalize();
        self.events.sort_by_key(|e| e.frame);
        let instance = Instance {
            scenario: self.scenario.clone(),
            association: self.association_log,
        };
        let objective = objective_value(&instance, &self.trace).expect("simulated traces are well formed");
        let metrics = EpisodeMetrics {
            reward: frames.iter().map(|f| f.reward).sum(),
            quality_gated: self.records.iter().filter(|r| r.selected).map(|r| r.quality).sum::<f64>() / users,
            quality_ungated: self.records.iter().map(|r| r.quality).sum::<f64>() / users,
            sessions: self.records.len(),
            selections: self.trace.selections.len(),
            uploads: self.trace.transmissions.len(),
            collisions: frames.iter().map(|f| f.collisions).sum(),
            objective,
        };
        EpisodeResult {
            instance,
            trace: self.trace,
            events: self.events,
            frames,
            sessions: self.records,
            metrics,
        }
    }
}
