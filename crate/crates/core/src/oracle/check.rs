//! Feasibility of a decision trace against the placement program.
//!
//! Out-of-horizon variables are treated as 0, so a path that would finish
//! after the last frame violates C1 and a selection in frame 0 violates C6.
//! C1 is enforced for the steps `1..=|p|` of each selected path only; the
//! steps past a path's end carry no indicator. C7 and C9 are definitions and
//! live in the objective.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::OracleError;
use crate::trace::{DecisionTrace, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Constraint {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    C8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub frame: usize,
    pub entity: String,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} frame {} {}: {}", self.constraint, self.frame, self.entity, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, c: Constraint) -> usize {
        self.violations.iter().filter(|v| v.constraint == c).count()
    }
}

/// Rejects traces whose variables fall outside the instance.
pub fn validate_structure(instance: &Instance, trace: &DecisionTrace) -> Result<(), OracleError> {
    instance.validate()?;
    let sc = &instance.scenario;
    let (users, horizon) = (sc.ue_count(), instance.horizon());
    let bad = |msg: String| Err(OracleError::Structure(msg));
    if trace.horizon != horizon {
        return bad(format!("trace horizon {} but instance has {horizon} frames", trace.horizon));
    }
    for r in &trace.selections {
        if r.frame >= horizon || r.ue >= users {
            return bad(format!("selection out of range: frame {} user {}", r.frame, r.ue));
        }
        if r.path.len() > sc.service_of(r.ue).max_blocks() {
            return bad(format!("user {} path {} longer than its service", r.ue, r.path));
        }
        if let Some(n) = r.path.nodes().iter().find(|n| !sc.topology.contains(**n)) {
            return bad(format!("user {} path names unknown node {n}", r.ue));
        }
    }
    for e in &trace.executions {
        if e.frame >= horizon || e.ue >= users || !sc.topology.contains(e.node) {
            return bad(format!("execution out of range: frame {} user {} node {}", e.frame, e.ue, e.node));
        }
        if e.block == 0 || e.block > sc.service_of(e.ue).max_blocks() {
            return bad(format!("user {} block {} outside its service", e.ue, e.block));
        }
    }
    for m in &trace.transmissions {
        if m.frame >= horizon || m.ue >= users || m.channel >= sc.channels {
            return bad(format!("transmission out of range: frame {} user {} channel {}", m.frame, m.ue, m.channel));
        }
    }
    // Variables are binary: a repeated entry would stand for the value 2.
    let mut seen = BTreeSet::new();
    if let Some(r) = trace.selections.iter().find(|r| !seen.insert((r.frame, r.ue, r.path.clone()))) {
        return bad(format!("selection repeated: frame {} user {}", r.frame, r.ue));
    }
    let mut seen = BTreeSet::new();
    if let Some(e) = trace.executions.iter().find(|e| !seen.insert(**e)) {
        return bad(format!("execution repeated: frame {} user {} block {}", e.frame, e.ue, e.block));
    }
    let mut seen = BTreeSet::new();
    if let Some(m) = trace.transmissions.iter().find(|m| !seen.insert(**m)) {
        return bad(format!("transmission repeated: frame {} user {}", m.frame, m.ue));
    }
    Ok(())
}

/// Every violated constraint instance, in constraint order.
pub fn check_constraints(instance: &Instance, trace: &DecisionTrace) -> Result<ViolationReport, OracleError> {
    validate_structure(instance, trace)?;
    let sc = &instance.scenario;
    let mut out = Vec::new();
    let mut push = |constraint, frame, entity: String, detail: String| {
        out.push(Violation {
            constraint,
            frame,
            entity,
            detail,
        })
    };

    let executed: BTreeSet<_> = trace.executions.iter().map(|e| (e.frame, e.ue, e.block, e.node)).collect();
    for r in &trace.selections {
        for (k, &n) in r.path.nodes().iter().enumerate() {
            let frame = r.frame + k;
            if !executed.contains(&(frame, r.ue, k + 1, n)) {
                push(
                    Constraint::C1,
                    r.frame,
                    format!("user {}", r.ue),
                    format!("path {} needs block {} on node {n} at frame {frame}", r.path, k + 1),
                );
            }
        }
    }

    let mut per_user_frame: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in &trace.selections {
        *per_user_frame.entry((r.frame, r.ue)).or_default() += 1;
    }
    for (&(frame, ue), &count) in &per_user_frame {
        if count > 1 {
            push(Constraint::C2, frame, format!("user {ue}"), format!("{count} paths selected"));
        }
    }

    let mut load: BTreeMap<(usize, usize), u32> = BTreeMap::new();
    for e in &trace.executions {
        *load.entry((e.frame, e.node.0)).or_default() += 1;
    }
    for (&(frame, node), &w) in &load {
        let cap = sc.topology.nodes()[node].capacity;
        if w > cap {
            push(Constraint::C3, frame, format!("node {node}"), format!("{w} blocks, capacity {cap}"));
        }
    }

    let mut sent: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut on_slot: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    for m in &trace.transmissions {
        *sent.entry((m.frame, m.ue)).or_default() += 1;
        let bs = instance.association[m.frame][m.ue].0;
        *on_slot.entry((m.frame, bs, m.channel)).or_default() += 1;
    }
    for (&(frame, ue), &count) in &sent {
        if count > 1 {
            push(Constraint::C4, frame, format!("user {ue}"), format!("{count} channels used"));
        }
    }
    for (&(frame, bs, ch), &count) in &on_slot {
        if count > 1 {
            push(Constraint::C5, frame, format!("node {bs} channel {ch}"), format!("{count} transmitters"));
        }
    }

    for (&(frame, ue), &count) in &per_user_frame {
        let uploads = frame
            .checked_sub(1)
            .map_or(0, |prev| sent.get(&(prev, ue)).copied().unwrap_or(0));
        if count > uploads {
            push(
                Constraint::C6,
                frame,
                format!("user {ue}"),
                format!("{count} selections after {uploads} uploads"),
            );
        }
    }

    for r in &trace.selections {
        let q = sc.service_of(r.ue).quality(r.path.len())?;
        let th = sc.ues[r.ue].threshold;
        if q < th {
            push(
                Constraint::C8,
                r.frame,
                format!("user {}", r.ue),
                format!("quality {q} below threshold {th}"),
            );
        }
    }

    out.sort_by_key(|v| (v.constraint, v.frame));
    Ok(ViolationReport { violations: out })
}
