use serde::{Deserialize, Serialize};

use super::OracleError;
use crate::model::path_transmission_cost;
use crate::trace::{DecisionTrace, Instance};

/// The objective split into its three terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// Quality of every selected path.
    pub quality: f64,
    /// `Σ ε_n W_n` over all frames, before scaling by `alpha`.
    pub execution: f64,
    /// `Σ Y_i` over all frames, before scaling by `beta`.
    pub transfer: f64,
    pub alpha: f64,
    pub beta: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    pub fn new(quality: f64, execution: f64, transfer: f64, alpha: f64, beta: f64) -> Self {
        Self {
            quality,
            execution,
            transfer,
            alpha,
            beta,
            total: quality - alpha * execution - beta * transfer,
        }
    }
}

/// Evaluates the objective on a trace as is, feasible or not. Each selection
/// is credited in full at its frame; head and tail transfers use the points
/// of attachment one frame before the start and one frame after the last
/// block, and vanish outside the horizon.
pub fn objective_value(instance: &Instance, trace: &DecisionTrace) -> Result<ObjectiveBreakdown, OracleError> {
    let sc = &instance.scenario;
    let mut quality = 0.0;
    let mut transfer = 0.0;
    for r in &trace.selections {
        quality += sc.service_of(r.ue).quality(r.path.len())?;
        let head = instance
            .poa(r.frame as isize - 1, r.ue)
            .map_or(0.0, |poa| sc.topology.transfer(poa, r.path.first()));
        let tail_poa = instance.poa((r.frame + r.path.len()) as isize, r.ue);
        // Request PoA equal to the head makes the helper's head term vanish.
        transfer += head + path_transmission_cost(&r.path, r.path.first(), tail_poa, &sc.topology)?;
    }
    let mut execution = 0.0;
    for e in &trace.executions {
        execution += sc.topology.node(e.node)?.exec_cost;
    }
    Ok(ObjectiveBreakdown::new(quality, execution, transfer, sc.alpha, sc.beta))
}
