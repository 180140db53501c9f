//! Exact depth-first search over per-frame decisions with branch-and-bound.
//!
//! Per frame and user, in user order: every running chain either continues
//! on a node with spare capacity or stops (only if its quality clears the
//! threshold); a fresh upload from the previous frame starts a new chain;
//! finally the user may upload on the lowest free channel of its station.
//! Two reductions keep the tree small without changing the optimum: an
//! upload must be followed by a chain start (an unused upload changes
//! nothing), and channels at a station are interchangeable so only the
//! lowest free one is tried.

use serde::Serialize;

use super::{objective_value, ObjectiveBreakdown, OracleError};
use crate::model::{ExecutionPath, NodeId};
use crate::trace::{DecisionTrace, Execution, Instance, Selection, Transmission};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverLimits {
    pub max_nodes: usize,
    pub max_users: usize,
    pub max_channels: usize,
    pub max_blocks: usize,
    pub max_horizon: usize,
    /// Refuse instances whose estimated tree size exceeds `10^max_log10_size`.
    pub max_log10_size: f64,
    /// Abort after visiting this many search nodes.
    pub max_visits: u64,
}

impl Default for SolverLimits {
    fn default() -> Self {
        Self {
            max_nodes: 3,
            max_users: 4,
            max_channels: 2,
            max_blocks: 3,
            max_horizon: 6,
            max_log10_size: 24.0,
            max_visits: 200_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Solution {
    pub trace: DecisionTrace,
    pub objective: ObjectiveBreakdown,
    pub visits: u64,
    pub leaves: u64,
}

/// Upper bound on the log10 size of the decision tree: per user and frame,
/// an upload bit, a start choice and a continue-or-stop choice for every
/// chain that can still be running.
pub fn estimate_log10_size(instance: &Instance) -> f64 {
    let sc = &instance.scenario;
    let n = sc.node_count() as f64;
    let live = sc.max_blocks().min(instance.horizon()) as f64;
    let per = 2f64.log10() + (n + 1.0).log10() * (1.0 + live);
    per * (sc.ue_count() * instance.horizon()) as f64
}

fn check_limits(instance: &Instance, limits: &SolverLimits) -> Result<(), OracleError> {
    let sc = &instance.scenario;
    let dims = [
        ("nodes", sc.node_count(), limits.max_nodes),
        ("users", sc.ue_count(), limits.max_users),
        ("channels", sc.channels, limits.max_channels),
        ("blocks", sc.max_blocks(), limits.max_blocks),
        ("frames", instance.horizon(), limits.max_horizon),
    ];
    for (what, value, cap) in dims {
        if value > cap {
            return Err(OracleError::TooLarge(format!("{value} {what} exceeds the cap of {cap}")));
        }
    }
    let size = estimate_log10_size(instance);
    if size > limits.max_log10_size {
        return Err(OracleError::TooLarge(format!(
            "estimated search space 10^{size:.1} exceeds 10^{:.1}",
            limits.max_log10_size
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Chain {
    ue: usize,
    start: usize,
    path: Vec<NodeId>,
}

struct Search<'a> {
    instance: &'a Instance,
    prune: bool,
    max_visits: u64,
    horizon: usize,
    users: usize,
    nodes: usize,
    /// `quality[i][k]`: user `i`'s quality after `k` blocks.
    quality: Vec<Vec<f64>>,
    threshold: Vec<f64>,
    max_blocks: Vec<usize>,
    exec_cost: Vec<f64>,

    running: Vec<Chain>,
    closed: Vec<Chain>,
    executions: Vec<Execution>,
    transmissions: Vec<Transmission>,
    /// Upload in the previous frame / this frame, per user.
    uploaded_prev: Vec<bool>,
    uploaded_now: Vec<bool>,
    load: Vec<u32>,
    channel_used: Vec<Vec<bool>>,
    sunk_cost: f64,
    closed_quality: f64,

    best: Option<(f64, DecisionTrace)>,
    visits: u64,
    leaves: u64,
    exhausted: bool,
}

impl Search<'_> {
    fn capacity(&self, n: usize) -> u32 {
        self.instance.scenario.topology.nodes()[n].capacity
    }

    fn transfer(&self, a: NodeId, b: NodeId) -> f64 {
        self.instance.scenario.topology.transfer(a, b)
    }

    /// Optimistic value of every leaf below the current frame boundary.
    fn bound(&self, t: usize) -> f64 {
        let left = self.horizon - t;
        let mut q = self.closed_quality;
        for c in &self.running {
            q += self.quality[c.ue][(c.path.len() + left).min(self.max_blocks[c.ue])];
        }
        if self.instance.scenario.channels > 0 {
            for i in 0..self.users {
                if t < self.horizon && self.uploaded_prev[i] {
                    q += self.quality[i][left.min(self.max_blocks[i])];
                }
                for start in t + 1..self.horizon {
                    q += self.quality[i][(self.horizon - start).min(self.max_blocks[i])];
                }
            }
        }
        q - self.sunk_cost
    }

    fn frame_start(&mut self, t: usize) {
        if self.exhausted {
            return;
        }
        if t == self.horizon {
            self.leaf();
            return;
        }
        if self.prune {
            if let Some((best, _)) = &self.best {
                if self.bound(t) < *best - 1e-9 {
                    return;
                }
            }
        }
        let saved_load = std::mem::replace(&mut self.load, vec![0; self.nodes]);
        let saved_channels = std::mem::replace(&mut self.channel_used, vec![vec![false; self.instance.scenario.channels]; self.nodes]);
        let saved_now = std::mem::replace(&mut self.uploaded_now, vec![false; self.users]);
        self.user_chains(t, 0, 0);
        self.load = saved_load;
        self.channel_used = saved_channels;
        self.uploaded_now = saved_now;
    }

    fn visit(&mut self) -> bool {
        self.visits += 1;
        if self.visits > self.max_visits {
            self.exhausted = true;
        }
        !self.exhausted
    }

    /// Decides the running chains of user `i`, starting at position `from`
    /// in `running`.
    fn user_chains(&mut self, t: usize, i: usize, from: usize) {
        if !self.visit() {
            return;
        }
        if i == self.users {
            self.end_frame(t);
            return;
        }
        let Some(idx) = (from..self.running.len()).find(|&j| self.running[j].ue == i && self.running[j].start < t) else {
            self.user_start(t, i);
            return;
        };
        let last = *self.running[idx].path.last().expect("non-empty chain");
        let blocks = self.running[idx].path.len();
        for n in 0..self.nodes {
            if self.load[n] >= self.capacity(n) {
                continue;
            }
            let hop = self.transfer(last, NodeId(n));
            let cost = self.exec_cost[n] * self.instance.scenario.alpha + hop * self.instance.scenario.beta;
            self.load[n] += 1;
            self.sunk_cost += cost;
            self.running[idx].path.push(NodeId(n));
            self.executions.push(Execution {
                frame: t,
                ue: i,
                block: blocks + 1,
                node: NodeId(n),
            });
            if blocks + 1 == self.max_blocks[i] {
                // Full length: close now.
                if self.quality[i][blocks + 1] >= self.threshold[i] {
                    let chain = self.running.remove(idx);
                    self.closed_quality += self.quality[i][blocks + 1];
                    self.closed.push(chain);
                    self.user_chains(t, i, idx);
                    let chain = self.closed.pop().expect("pushed above");
                    self.closed_quality -= self.quality[i][blocks + 1];
                    self.running.insert(idx, chain);
                }
            } else {
                self.user_chains(t, i, idx + 1);
            }
            self.executions.pop();
            self.running[idx].path.pop();
            self.sunk_cost -= cost;
            self.load[n] -= 1;
        }
        // Stop here.
        if self.quality[i][blocks] >= self.threshold[i] {
            let chain = self.running.remove(idx);
            self.closed_quality += self.quality[i][blocks];
            self.closed.push(chain);
            self.user_chains(t, i, idx);
            let chain = self.closed.pop().expect("pushed above");
            self.closed_quality -= self.quality[i][blocks];
            self.running.insert(idx, chain);
        }
    }

    fn user_start(&mut self, t: usize, i: usize) {
        if !self.uploaded_prev[i] {
            self.user_upload(t, i);
            return;
        }
        let request_poa = self.instance.association[t - 1][i];
        for n in 0..self.nodes {
            if self.load[n] >= self.capacity(n) {
                continue;
            }
            let head = self.transfer(request_poa, NodeId(n));
            let cost = self.exec_cost[n] * self.instance.scenario.alpha + head * self.instance.scenario.beta;
            self.load[n] += 1;
            self.sunk_cost += cost;
            self.executions.push(Execution {
                frame: t,
                ue: i,
                block: 1,
                node: NodeId(n),
            });
            let chain = Chain {
                ue: i,
                start: t,
                path: vec![NodeId(n)],
            };
            if self.max_blocks[i] == 1 {
                if self.quality[i][1] >= self.threshold[i] {
                    self.closed_quality += self.quality[i][1];
                    self.closed.push(chain);
                    self.user_upload(t, i);
                    self.closed.pop();
                    self.closed_quality -= self.quality[i][1];
                }
            } else {
                self.running.push(chain);
                self.user_upload(t, i);
                self.running.pop();
            }
            self.executions.pop();
            self.sunk_cost -= cost;
            self.load[n] -= 1;
        }
    }

    fn user_upload(&mut self, t: usize, i: usize) {
        if t + 1 < self.horizon {
            let bs = self.instance.association[t][i].0;
            if let Some(ch) = self.channel_used[bs].iter().position(|used| !used) {
                self.channel_used[bs][ch] = true;
                self.uploaded_now[i] = true;
                self.transmissions.push(Transmission { frame: t, ue: i, channel: ch });
                self.user_chains(t, i + 1, 0);
                self.transmissions.pop();
                self.uploaded_now[i] = false;
                self.channel_used[bs][ch] = false;
            }
        }
        self.user_chains(t, i + 1, 0);
    }

    fn end_frame(&mut self, t: usize) {
        let next = self.uploaded_now.clone();
        let prev = std::mem::replace(&mut self.uploaded_prev, next);
        self.frame_start(t + 1);
        self.uploaded_prev = prev;
    }

    fn leaf(&mut self) {
        self.leaves += 1;
        // Chains still running at the horizon are selected at their length.
        if self.running.iter().any(|c| self.quality[c.ue][c.path.len()] < self.threshold[c.ue]) {
            return;
        }
        let mut trace = DecisionTrace::empty(self.horizon);
        for c in self.closed.iter().chain(&self.running) {
            trace.selections.push(Selection {
                frame: c.start,
                ue: c.ue,
                path: ExecutionPath::new(c.path.clone()).expect("non-empty chain"),
            });
        }
        trace.executions = self.executions.clone();
        trace.transmissions = self.transmissions.clone();
        trace.canonicalize();
        let value = objective_value(self.instance, &trace).expect("search builds valid traces").total;
        if self.best.as_ref().is_none_or(|(best, _)| value > *best) {
            self.best = Some((value, trace));
        }
    }
}

/// Maximises the objective over all feasible traces of `instance`. With
/// `prune` off every leaf of the (reduced) tree is evaluated.
pub fn solve_exact(instance: &Instance, limits: &SolverLimits, prune: bool) -> Result<Solution, OracleError> {
    instance.validate()?;
    check_limits(instance, limits)?;
    let sc = &instance.scenario;
    let users = sc.ue_count();
    let quality = (0..users)
        .map(|i| {
            let s = sc.service_of(i);
            (0..=s.max_blocks()).map(|k| s.quality(k)).collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut search = Search {
        instance,
        prune,
        max_visits: limits.max_visits,
        horizon: instance.horizon(),
        users,
        nodes: sc.node_count(),
        quality,
        threshold: sc.ues.iter().map(|u| u.threshold).collect(),
        max_blocks: (0..users).map(|i| sc.service_of(i).max_blocks()).collect(),
        exec_cost: sc.topology.nodes().iter().map(|n| n.exec_cost).collect(),
        running: Vec::new(),
        closed: Vec::new(),
        executions: Vec::new(),
        transmissions: Vec::new(),
        uploaded_prev: vec![false; users],
        uploaded_now: vec![false; users],
        load: vec![0; sc.node_count()],
        channel_used: Vec::new(),
        sunk_cost: 0.0,
        closed_quality: 0.0,
        best: None,
        visits: 0,
        leaves: 0,
        exhausted: false,
    };
    search.frame_start(0);
    if search.exhausted {
        return Err(OracleError::Budget(limits.max_visits));
    }
    let (_, trace) = search.best.expect("the empty trace is always a leaf");
    let objective = objective_value(instance, &trace)?;
    Ok(Solution {
        trace,
        objective,
        visits: search.visits,
        leaves: search.leaves,
    })
}
