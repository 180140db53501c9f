//! Decision traces (path selections, block executions, uploads) and their
//! line-delimited JSON encoding.
//!
//! A trace file starts with one `instance` record carrying the world and the
//! realised association trajectory, followed by one `event` record per line:
//!
//! ```text
//! {"record":"instance","scenario":{...},"association":[[0,1],[0,1]]}
//! {"record":"event","frame":0,"ue":1,"event":"upload","node":1,"channel":0,"block":null,"path":null,"quality":null,"cost":null}
//! {"record":"event","frame":1,"ue":1,"event":"exec","node":1,"channel":null,"block":1,"path":null,"quality":0.64,"cost":0.0}
//! ```
//!
//! Only `upload`, `select` and `exec` events define the decision variables;
//! the other kinds are informational.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::model::{ExecutionPath, NodeId};
use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace has no instance record")]
    MissingInstance,
    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
    #[error("structural error: {0}")]
    Structure(String),
}

/// `r^t_{i,p} = 1`: user `ue` selects `path` at `frame`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Selection {
    pub frame: usize,
    pub ue: usize,
    pub path: ExecutionPath,
}

/// `e^t_{i,k,n} = 1`: block `block` (one-based) of the user's service runs on `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Execution {
    pub frame: usize,
    pub ue: usize,
    pub block: usize,
    pub node: NodeId,
}

/// `m^t_{i,c} = 1`: a successful upload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transmission {
    pub frame: usize,
    pub ue: usize,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub horizon: usize,
    pub selections: Vec<Selection>,
    pub executions: Vec<Execution>,
    pub transmissions: Vec<Transmission>,
}

impl DecisionTrace {
    pub fn empty(horizon: usize) -> Self {
        Self {
            horizon,
            ..Default::default()
        }
    }

    /// Sorts every variable list so that equal traces compare equal.
    pub fn canonicalize(&mut self) {
        self.selections.sort();
        self.executions.sort();
        self.transmissions.sort();
    }

    pub fn from_events(horizon: usize, events: &[TraceEvent]) -> Result<Self, TraceError> {
        let mut trace = Self::empty(horizon);
        for (idx, ev) in events.iter().enumerate() {
            let missing = |what: &str| TraceError::Malformed {
                line: idx + 2,
                detail: format!("{:?} event without {what}", ev.event),
            };
            match ev.event {
                EventKind::Upload => trace.transmissions.push(Transmission {
                    frame: ev.frame,
                    ue: ev.ue.ok_or_else(|| missing("ue"))?,
                    channel: ev.channel.ok_or_else(|| missing("channel"))?,
                }),
                EventKind::Select => trace.selections.push(Selection {
                    frame: ev.frame,
                    ue: ev.ue.ok_or_else(|| missing("ue"))?,
                    path: ev.path.clone().ok_or_else(|| missing("path"))?,
                }),
                EventKind::Exec => trace.executions.push(Execution {
                    frame: ev.frame,
                    ue: ev.ue.ok_or_else(|| missing("ue"))?,
                    block: ev.block.ok_or_else(|| missing("block"))?,
                    node: ev.node.ok_or_else(|| missing("node"))?,
                }),
                _ => {}
            }
        }
        Ok(trace)
    }

    /// Decision-variable events in frame order.
    pub fn to_events(&self) -> Vec<TraceEvent> {
        let mut events: Vec<TraceEvent> = Vec::new();
        events.extend(self.transmissions.iter().map(|m| TraceEvent {
            channel: Some(m.channel),
            ..TraceEvent::new(m.frame, Some(m.ue), EventKind::Upload)
        }));
        events.extend(self.selections.iter().map(|r| TraceEvent {
            node: Some(r.path.first()),
            path: Some(r.path.clone()),
            ..TraceEvent::new(r.frame, Some(r.ue), EventKind::Select)
        }));
        events.extend(self.executions.iter().map(|e| TraceEvent {
            node: Some(e.node),
            block: Some(e.block),
            ..TraceEvent::new(e.frame, Some(e.ue), EventKind::Exec)
        }));
        events.sort_by_key(|e| (e.frame, e.ue, e.event));
        events
    }
}

/// A full problem instance: the world plus the association of every user
/// for every frame of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub scenario: Scenario,
    /// `association[t][i]` is the point of attachment of user `i` at frame `t`.
    pub association: Vec<Vec<NodeId>>,
}

impl Instance {
    pub fn horizon(&self) -> usize {
        self.association.len()
    }

    /// `ψ` with the out-of-horizon convention: `None` outside `0..horizon`.
    pub fn poa(&self, frame: isize, ue: usize) -> Option<NodeId> {
        if frame < 0 {
            return None;
        }
        self.association.get(frame as usize).map(|row| row[ue])
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        let users = self.scenario.ue_count();
        for (t, row) in self.association.iter().enumerate() {
            if row.len() != users {
                return Err(TraceError::Structure(format!(
                    "frame {t}: association has {} entries for {users} users",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|n| !self.scenario.topology.contains(**n)) {
                return Err(TraceError::Structure(format!("frame {t}: unknown node {bad}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Upload,
    Collision,
    Select,
    Exec,
    Deliver,
    /// A chain closed below its user's quality threshold; not a selection.
    Discard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub frame: usize,
    pub ue: Option<usize>,
    pub event: EventKind,
    pub node: Option<NodeId>,
    pub channel: Option<usize>,
    pub block: Option<usize>,
    pub path: Option<ExecutionPath>,
    pub quality: Option<f64>,
    pub cost: Option<f64>,
}

impl TraceEvent {
    pub fn new(frame: usize, ue: Option<usize>, event: EventKind) -> Self {
        Self {
            frame,
            ue,
            event,
            node: None,
            channel: None,
            block: None,
            path: None,
            quality: None,
            cost: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum Record {
    Instance(Instance),
    Event(TraceEvent),
}

pub fn write_trace<W: Write>(mut out: W, instance: &Instance, events: &[TraceEvent]) -> Result<(), TraceError> {
    let line = serde_json::to_string(&Record::Instance(instance.clone())).map_err(|source| TraceError::Json { line: 1, source })?;
    writeln!(out, "{line}")?;
    for (idx, ev) in events.iter().enumerate() {
        let line = serde_json::to_string(&Record::Event(ev.clone())).map_err(|source| TraceError::Json { line: idx + 2, source })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(input: R) -> Result<(Instance, Vec<TraceEvent>), TraceError> {
    let mut instance = None;
    let mut events = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|source| TraceError::Json { line: idx + 1, source })?;
        match record {
            Record::Instance(inst) if instance.is_none() => instance = Some(inst),
            Record::Instance(_) => {
                return Err(TraceError::Malformed {
                    line: idx + 1,
                    detail: "second instance record".into(),
                })
            }
            Record::Event(ev) => events.push(ev),
        }
    }
    let instance = instance.ok_or(TraceError::MissingInstance)?;
    instance.validate()?;
    Ok((instance, events))
}
