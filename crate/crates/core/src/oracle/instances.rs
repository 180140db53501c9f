use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{GridSpec, Node, NodeId, QualityCurve, Service, Topology, UeProfile};
use crate::scenario::Scenario;
use crate::trace::Instance;

/// Dimensions of a randomly drawn small instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceDims {
    pub nodes: usize,
    pub users: usize,
    pub channels: usize,
    pub blocks: usize,
    pub frames: usize,
}

impl Default for InstanceDims {
    fn default() -> Self {
        Self {
            nodes: 2,
            users: 3,
            channels: 1,
            blocks: 2,
            frames: 4,
        }
    }
}

/// Nodes on a one-row grid, one cell each; integer per-hop costs; users
/// hopping to a random neighbouring cell a third of the time.
pub fn random_instance<R: Rng + ?Sized>(dims: &InstanceDims, rng: &mut R) -> Instance {
    let grid = GridSpec {
        rows: 1,
        cols: dims.nodes,
        cell_size: 100.0,
    };
    let nodes = (0..dims.nodes)
        .map(|_| Node {
            capacity: rng.random_range(1..=2),
            exec_cost: rng.random_range(1.0..4.0),
        })
        .collect();
    let per_hop = rng.random_range(0.5..2.0);
    let transfer = (0..dims.nodes)
        .map(|a| (0..dims.nodes).map(|b| a.abs_diff(b) as f64 * per_hop).collect())
        .collect();
    let areas = (0..dims.nodes).map(NodeId).collect();
    let topology = Topology::new(nodes, transfer, areas, grid).expect("valid random topology");
    let services = [1.0, 0.6, 1.5]
        .into_iter()
        .map(|rate| Service::new(dims.blocks, QualityCurve::Saturating { rate }).expect("valid service"))
        .collect();
    let ues = (0..dims.users)
        .map(|_| UeProfile {
            service: rng.random_range(0..3),
            threshold: rng.random_range(0.1..0.5),
        })
        .collect();
    let scenario = Scenario::new(topology, services, ues, dims.channels, 0.1, 0.1).expect("valid random scenario");
    let mut here: Vec<usize> = (0..dims.users).map(|_| rng.random_range(0..dims.nodes)).collect();
    let mut association = Vec::with_capacity(dims.frames);
    for t in 0..dims.frames {
        if t > 0 {
            for cell in &mut here {
                if dims.nodes > 1 && rng.random_bool(1.0 / 3.0) {
                    *cell = if *cell == 0 {
                        1
                    } else if *cell + 1 == dims.nodes || rng.random_bool(0.5) {
                        *cell - 1
                    } else {
                        *cell + 1
                    };
                }
            }
        }
        association.push(here.iter().map(|&c| NodeId(c)).collect());
    }
    Instance { scenario, association }
}
