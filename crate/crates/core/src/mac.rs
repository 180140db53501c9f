//! Greedy uplink channel assignment.
//!
//! Users whose ongoing inference sits just below their quality threshold are
//! served first: `priority = max(1 / (Q̄ − Q), 10⁻⁸)`, with the floor also
//! covering `Q ≥ Q̄`.

use std::cmp::Ordering;

use crate::config::AccessMode;
use crate::model::NodeId;

pub const PRIORITY_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorityRecord {
    pub ue: usize,
    pub priority: f64,
}

pub fn priority(quality: f64, threshold: f64) -> f64 {
    let gap = threshold - quality;
    if gap > 0.0 {
        (1.0 / gap).max(PRIORITY_FLOOR)
    } else {
        PRIORITY_FLOOR
    }
}

/// One record per user; `qualities[i]` is 0 for users without a session.
pub fn compute_priorities(qualities: &[f64], thresholds: &[f64]) -> Vec<PriorityRecord> {
    qualities
        .iter()
        .zip(thresholds)
        .enumerate()
        .map(|(ue, (&q, &th))| PriorityRecord {
            ue,
            priority: priority(q, th),
        })
        .collect()
}

fn by_priority(a: &PriorityRecord, b: &PriorityRecord) -> Ordering {
    b.priority.total_cmp(&a.priority).then(a.ue.cmp(&b.ue))
}

/// Users sorted by descending priority, ties by ascending index.
pub fn priority_order(records: &[PriorityRecord]) -> Vec<usize> {
    let mut sorted = records.to_vec();
    sorted.sort_by(by_priority);
    sorted.into_iter().map(|r| r.ue).collect()
}

/// Assigns channels `0..channels` to the highest-priority eligible users,
/// per base station or network-wide depending on `mode`. Users that are not
/// `eligible` (mid-session or already holding a pending upload) never
/// contend.
pub fn grant_channels(
    records: &[PriorityRecord],
    association: &[NodeId],
    eligible: &[bool],
    channels: usize,
    mode: AccessMode,
) -> Vec<Option<usize>> {
    let mut grants = vec![None; association.len()];
    if channels == 0 {
        return grants;
    }
    let mut candidates: Vec<PriorityRecord> = records
        .iter()
        .copied()
        .filter(|r| eligible.get(r.ue).copied().unwrap_or(false))
        .collect();
    candidates.sort_by(by_priority);
    match mode {
        AccessMode::PerBs => {
            let nodes = association.iter().map(|n| n.0 + 1).max().unwrap_or(0);
            let mut used = vec![0usize; nodes];
            for r in candidates {
                let bs = association[r.ue].0;
                if used[bs] < channels {
                    grants[r.ue] = Some(used[bs]);
                    used[bs] += 1;
                }
            }
        }
        AccessMode::Global => {
            for (channel, r) in candidates.into_iter().take(channels).enumerate() {
                grants[r.ue] = Some(channel);
            }
        }
    }
    grants
}

/// Channel grants for one frame.
pub trait AccessScheduler {
    fn grant(&mut self, frame: usize, ctx: &AccessContext<'_>) -> Vec<Option<usize>>;
}

#[derive(Debug, Clone, Copy)]
pub struct AccessContext<'a> {
    pub priorities: &'a [PriorityRecord],
    pub association: &'a [NodeId],
    pub eligible: &'a [bool],
    pub channels: usize,
}

/// The priority-ordered scheduler.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyAccess {
    pub mode: AccessMode,
}

impl AccessScheduler for GreedyAccess {
    fn grant(&mut self, _frame: usize, ctx: &AccessContext<'_>) -> Vec<Option<usize>> {
        grant_channels(ctx.priorities, ctx.association, ctx.eligible, ctx.channels, self.mode)
    }
}

/// Fixed grants per frame, for replaying hand-written scenarios. Grants to
/// ineligible users are dropped; frames past the script grant nothing.
#[derive(Debug, Clone, Default)]
pub struct ScriptedAccess {
    pub grants: Vec<Vec<Option<usize>>>,
}

impl AccessScheduler for ScriptedAccess {
    fn grant(&mut self, frame: usize, ctx: &AccessContext<'_>) -> Vec<Option<usize>> {
        let users = ctx.association.len();
        match self.grants.get(frame) {
            Some(row) => (0..users)
                .map(|i| row.get(i).copied().flatten().filter(|_| ctx.eligible[i]))
                .collect(),
            None => vec![None; users],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closer_to_threshold_wins() {
        let recs = compute_priorities(&[0.3, 0.4], &[0.5, 0.5]);
        assert!(recs[1].priority > recs[0].priority);
        assert!((recs[0].priority - 5.0).abs() < 1e-12);
        assert!((recs[1].priority - 10.0).abs() < 1e-9);
        assert_eq!(priority_order(&recs), vec![1, 0]);
    }

    #[test]
    fn above_threshold_clamps_to_floor() {
        let recs = compute_priorities(&[0.3, 0.4], &[0.25, 0.25]);
        assert_eq!(recs[0].priority, PRIORITY_FLOOR);
        assert_eq!(recs[1].priority, PRIORITY_FLOOR);
        assert_eq!(priority_order(&recs), vec![0, 1]);
    }

    #[test]
    fn clamp_over_grid() {
        for qi in 0..=20 {
            for ti in 0..=20 {
                let (q, th) = (qi as f64 / 20.0, ti as f64 / 20.0);
                let p = priority(q, th);
                assert!(p >= PRIORITY_FLOOR && p.is_finite());
                if q >= th {
                    assert_eq!(p, PRIORITY_FLOOR, "q={q} th={th}");
                } else {
                    assert!((p - 1.0 / (th - q)).abs() <= 1e-9 * p);
                }
            }
        }
    }

    #[test]
    fn top_two_of_three_on_one_bs() {
        let recs = compute_priorities(&[0.1, 0.3, 0.2], &[0.5, 0.5, 0.5]);
        let assoc = vec![NodeId(0); 3];
        let grants = grant_channels(&recs, &assoc, &[true; 3], 2, AccessMode::PerBs);
        assert_eq!(grants, vec![None, Some(0), Some(1)]);
    }

    #[test]
    fn zero_channels_grant_nothing() {
        let recs = compute_priorities(&[0.0; 3], &[0.5; 3]);
        let assoc = vec![NodeId(0), NodeId(1), NodeId(1)];
        assert_eq!(grant_channels(&recs, &assoc, &[true; 3], 0, AccessMode::PerBs), vec![None; 3]);
        assert_eq!(grant_channels(&recs, &assoc, &[true; 3], 0, AccessMode::Global), vec![None; 3]);
    }

    #[test]
    fn one_user_per_bs_all_granted() {
        let recs = compute_priorities(&[0.0; 3], &[0.2, 0.3, 0.4]);
        let assoc = vec![NodeId(2), NodeId(0), NodeId(1)];
        let grants = grant_channels(&recs, &assoc, &[true; 3], 1, AccessMode::PerBs);
        assert_eq!(grants, vec![Some(0); 3]);
    }

    #[test]
    fn ineligible_users_never_contend() {
        let recs = compute_priorities(&[0.45, 0.0], &[0.5, 0.5]);
        let assoc = vec![NodeId(0); 2];
        let grants = grant_channels(&recs, &assoc, &[false, true], 1, AccessMode::PerBs);
        assert_eq!(grants, vec![None, Some(0)]);
    }

    #[test]
    fn global_mode_limits_network_wide() {
        let recs = compute_priorities(&[0.0; 3], &[0.2, 0.3, 0.4]);
        let assoc = vec![NodeId(2), NodeId(0), NodeId(1)];
        let grants = grant_channels(&recs, &assoc, &[true; 3], 2, AccessMode::Global);
        // Lowest threshold first: 1/0.2 > 1/0.3 > 1/0.4.
        assert_eq!(grants, vec![Some(0), Some(1), None]);
    }

    fn arb_case() -> impl Strategy<Value = (Vec<f64>, Vec<usize>, Vec<bool>, usize)> {
        (1usize..10).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(0usize..3, n),
                proptest::collection::vec(any::<bool>(), n),
                0usize..4,
            )
        })
    }

    proptest! {
        #[test]
        fn no_shared_bs_channel((prio, bs, elig, c) in arb_case()) {
            let recs: Vec<_> = prio.iter().enumerate().map(|(ue, &p)| PriorityRecord { ue, priority: p }).collect();
            let assoc: Vec<NodeId> = bs.iter().map(|&b| NodeId(b)).collect();
            for mode in [AccessMode::PerBs, AccessMode::Global] {
                let grants = grant_channels(&recs, &assoc, &elig, c, mode);
                let mut seen = std::collections::HashSet::new();
                for (ue, g) in grants.iter().enumerate() {
                    if let Some(ch) = g {
                        prop_assert!(*ch < c);
                        prop_assert!(elig[ue]);
                        prop_assert!(seen.insert((assoc[ue], *ch)));
                    }
                }
            }
        }

        #[test]
        fn only_ordering_matters((prio, bs, elig, c) in arb_case(), scale in 0.01f64..100.0, shift in 0.0f64..5.0) {
            let recs: Vec<_> = prio.iter().enumerate().map(|(ue, &p)| PriorityRecord { ue, priority: p }).collect();
            let moved: Vec<_> = recs.iter().map(|r| PriorityRecord { ue: r.ue, priority: r.priority * scale + shift }).collect();
            let assoc: Vec<NodeId> = bs.iter().map(|&b| NodeId(b)).collect();
            prop_assert_eq!(
                grant_channels(&recs, &assoc, &elig, c, AccessMode::PerBs),
                grant_channels(&moved, &assoc, &elig, c, AccessMode::PerBs)
            );
        }

        #[test]
        fn enough_channels_serve_everyone((prio, bs, elig, _c) in arb_case()) {
            let recs: Vec<_> = prio.iter().enumerate().map(|(ue, &p)| PriorityRecord { ue, priority: p }).collect();
            let assoc: Vec<NodeId> = bs.iter().map(|&b| NodeId(b)).collect();
            let grants = grant_channels(&recs, &assoc, &elig, prio.len(), AccessMode::PerBs);
            for ue in 0..prio.len() {
                prop_assert_eq!(grants[ue].is_some(), elig[ue]);
            }
        }
    }
}
