//! Uplink outcome of a set of channel grants.

use std::collections::BTreeMap;

use crate::model::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UplinkOutcome {
    /// `m_i`: the user's upload went through.
    pub success: Vec<bool>,
    /// Number of `(node, channel)` pairs with two or more transmitters.
    pub collisions: usize,
    /// Users involved in a collision.
    pub collided: Vec<usize>,
}

/// A transmission succeeds iff it is the only one on its channel at its
/// base station. Channels are reused across base stations freely.
pub fn apply_channel_grants(grants: &[Option<usize>], association: &[NodeId]) -> UplinkOutcome {
    let mut by_slot: BTreeMap<(NodeId, usize), Vec<usize>> = BTreeMap::new();
    for (ue, grant) in grants.iter().enumerate() {
        if let Some(ch) = grant {
            by_slot.entry((association[ue], *ch)).or_default().push(ue);
        }
    }
    let mut out = UplinkOutcome {
        success: vec![false; grants.len()],
        ..Default::default()
    };
    for users in by_slot.into_values() {
        if let [only] = users[..] {
            out.success[only] = true;
        } else {
            out.collisions += 1;
            out.collided.extend(users);
        }
    }
    out.collided.sort_unstable();
    out
}
