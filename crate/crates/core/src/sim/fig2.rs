//! A hand-scripted two-cell walkthrough: four users, two base stations, one
//! first-frame collision and one chain that follows its user across cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{run_episode, EpisodeResult, EpisodeSpec, MobilityModel, SimError};
use crate::mac::ScriptedAccess;
use crate::model::{GridSpec, Node, NodeId, QualityCurve, Service, Topology, UeProfile};
use crate::policy::{DecisionView, JointAction, PlacementPolicy};
use crate::scenario::Scenario;
use crate::trace::{EventKind, TraceEvent};

/// Replays a fixed action table; frames past the table idle.
#[derive(Debug, Clone)]
pub struct ScriptedPolicy {
    pub actions: Vec<JointAction>,
}

impl PlacementPolicy for ScriptedPolicy {
    fn name(&self) -> &str {
        "scripted"
    }

    fn decide(&mut self, view: &DecisionView<'_>) -> JointAction {
        self.actions
            .get(view.frame)
            .cloned()
            .unwrap_or_else(|| JointAction::idle(view.masks.len()))
    }
}

const FRAMES: usize = 7;

/// The world of the walkthrough plus its association, grant and action
/// scripts.
pub fn fig2_instance() -> (Scenario, Vec<Vec<NodeId>>, ScriptedAccess, ScriptedPolicy) {
    let grid = GridSpec {
        rows: 1,
        cols: 2,
        cell_size: 100.0,
    };
    let nodes = vec![
        Node {
            capacity: 4,
            exec_cost: 1.0,
        };
        2
    ];
    let topology = Topology::new(nodes, vec![vec![0.0, 1.0], vec![1.0, 0.0]], vec![NodeId(0), NodeId(1)], grid)
        .expect("valid topology");
    let services = [1.0, 0.6, 1.5]
        .into_iter()
        .map(|rate| Service::new(4, QualityCurve::Saturating { rate }).expect("valid service"))
        .collect();
    let ues = [0, 0, 1, 2]
        .into_iter()
        .map(|service| UeProfile { service, threshold: 0.5 })
        .collect();
    let scenario = Scenario::new(topology, services, ues, 2, 0.1, 0.1).expect("valid scenario");

    let (b0, b1) = (NodeId(0), NodeId(1));
    // u3 walks into the second cell at frame 3.
    let association = (0..FRAMES)
        .map(|t| vec![b0, b0, if t < 3 { b0 } else { b1 }, b1])
        .collect();
    let access = ScriptedAccess {
        grants: vec![
            vec![Some(0), Some(0), Some(1), Some(0)],
            vec![Some(0), Some(1), None, None],
        ],
    };
    let (n0, n1) = (Some(b0), Some(b1));
    let actions = vec![
        vec![None, None, None, None],
        vec![None, None, n0, n1],
        vec![n0, n0, n0, n1],
        vec![n0, n0, n1, n1],
        vec![n0, n0, n1, n1],
        vec![n0, n0, None, None],
        vec![None, None, None, None],
    ];
    let policy = ScriptedPolicy {
        actions: actions.into_iter().map(JointAction).collect(),
    };
    (scenario, association, access, policy)
}

pub struct Fig2Demo {
    pub result: EpisodeResult,
    /// One line per informative event, users and stations numbered from 1.
    pub narrative: Vec<String>,
}

pub fn run_fig2() -> Result<Fig2Demo, SimError> {
    let (scenario, association, mut access, mut policy) = fig2_instance();
    let spec = EpisodeSpec {
        frames: FRAMES,
        history: 3,
        mobility: MobilityModel::Scripted(association),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let result = run_episode(&scenario, &spec, &mut access, &mut policy, &mut rng)?;
    let narrative = result.events.iter().filter_map(describe).collect();
    Ok(Fig2Demo { result, narrative })
}

fn describe(ev: &TraceEvent) -> Option<String> {
    let u = ev.ue? + 1;
    let bs = ev.node.map_or(0, |n| n.0 + 1);
    let t = ev.frame;
    Some(match ev.event {
        EventKind::Upload => format!("frame {t}: u{u} uploads on channel {} at BS {bs}", ev.channel? + 1),
        EventKind::Collision => format!("frame {t}: u{u} collides on channel {} at BS {bs}", ev.channel? + 1),
        EventKind::Exec => format!(
            "frame {t}: u{u} block {} on BS {bs} (quality {:.3})",
            ev.block?,
            ev.quality?
        ),
        EventKind::Deliver => format!(
            "frame {t}: u{u} receives its result at BS {bs} (quality {:.3}, path BS {})",
            ev.quality?,
            ev.path.as_ref()?.nodes().iter().map(|n| (n.0 + 1).to_string()).collect::<Vec<_>>().join("-")
        ),
        EventKind::Select | EventKind::Discard => return None,
    })
}
