//! A concrete world: sampled base stations, services and user profiles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::model::{parse_quality_tables, GridSpec, ModelError, Node, QualityCurve, Service, Topology, UeProfile};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("user {ue}: {detail}")]
    User { ue: usize, detail: String },
    #[error("reading quality tables: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub topology: Topology,
    pub services: Vec<Service>,
    pub ues: Vec<UeProfile>,
    pub channels: usize,
    pub alpha: f64,
    pub beta: f64,
}

impl Scenario {
    pub fn new(
        topology: Topology,
        services: Vec<Service>,
        ues: Vec<UeProfile>,
        channels: usize,
        alpha: f64,
        beta: f64,
    ) -> Result<Self, ScenarioError> {
        for (ue, profile) in ues.iter().enumerate() {
            if profile.service >= services.len() {
                return Err(ScenarioError::User {
                    ue,
                    detail: format!("service {} does not exist", profile.service),
                });
            }
            if !(0.0..=1.0).contains(&profile.threshold) {
                return Err(ScenarioError::User {
                    ue,
                    detail: format!("threshold {} outside [0, 1]", profile.threshold),
                });
            }
        }
        if !(alpha >= 0.0 && beta >= 0.0) {
            return Err(ScenarioError::Invalid("alpha and beta must be non-negative".into()));
        }
        Ok(Self {
            topology,
            services,
            ues,
            channels,
            alpha,
            beta,
        })
    }

    /// Samples a world from the configuration. The topology and the user
    /// profiles come from separate streams of `cfg.seed`.
    pub fn generate(cfg: &SimConfig) -> Result<Self, ScenarioError> {
        cfg.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        let mut topo_rng = stream_rng(cfg.seed, Stream::Topology, 0);
        let nodes = (0..cfg.grid.node_count)
            .map(|_| Node {
                capacity: topo_rng.random_range(cfg.nodes.capacity_min..=cfg.nodes.capacity_max),
                exec_cost: if cfg.nodes.exec_cost_max > cfg.nodes.exec_cost_min {
                    topo_rng.random_range(cfg.nodes.exec_cost_min..cfg.nodes.exec_cost_max)
                } else {
                    cfg.nodes.exec_cost_min
                },
            })
            .collect();
        let grid = GridSpec {
            rows: cfg.grid.rows,
            cols: cfg.grid.cols,
            cell_size: cfg.grid.cell_size_m,
        };
        let topology = Topology::on_grid(grid, nodes, cfg.nodes.transfer_cost_per_hop)?;

        let curves: Vec<QualityCurve> = match &cfg.services.quality_table_file {
            Some(path) => {
                let tables = parse_quality_tables(&std::fs::read_to_string(path)?)?;
                if tables.len() < cfg.services.count {
                    return Err(ScenarioError::Invalid(format!(
                        "{} curves for {} services",
                        tables.len(),
                        cfg.services.count
                    )));
                }
                tables
            }
            None => cfg
                .services
                .saturation_rates
                .iter()
                .cycle()
                .take(cfg.services.count)
                .map(|&rate| QualityCurve::Saturating { rate })
                .collect(),
        };
        let services = curves
            .into_iter()
            .take(cfg.services.count)
            .map(|curve| {
                let blocks = match &curve {
                    QualityCurve::Tabulated { values } => values.len() - 1,
                    QualityCurve::Saturating { .. } => cfg.services.max_blocks,
                };
                Service::new(blocks, curve)
            })
            .collect::<Result<Vec<_>, _>>()?;

        let mut user_rng = stream_rng(cfg.seed, Stream::Users, 0);
        let ues = (0..cfg.users.count)
            .map(|_| UeProfile {
                service: user_rng.random_range(0..services.len()),
                threshold: if cfg.users.threshold_max > cfg.users.threshold_min {
                    user_rng.random_range(cfg.users.threshold_min..cfg.users.threshold_max)
                } else {
                    cfg.users.threshold_min
                },
            })
            .collect();
        Self::new(
            topology,
            services,
            ues,
            cfg.access.channels,
            cfg.objective.alpha,
            cfg.objective.beta,
        )
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn ue_count(&self) -> usize {
        self.ues.len()
    }

    pub fn service_of(&self, ue: usize) -> &Service {
        &self.services[self.ues[ue].service]
    }

    pub fn max_blocks(&self) -> usize {
        self.services.iter().map(Service::max_blocks).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_world_matches_parameter_ranges() {
        let s = Scenario::generate(&SimConfig::default()).unwrap();
        assert_eq!(s.node_count(), 16);
        assert_eq!(s.ue_count(), 15);
        assert_eq!(s.services.len(), 3);
        assert!(s.topology.nodes().iter().all(|n| (1..=3).contains(&n.capacity)));
        assert!(s.topology.nodes().iter().all(|n| (1.0..4.0).contains(&n.exec_cost)));
        assert!(s.ues.iter().all(|u| (0.1..0.5).contains(&u.threshold)));
        assert_eq!(s.max_blocks(), 4);
    }

    #[test]
    fn user_count_does_not_disturb_topology() {
        let mut cfg = SimConfig::default();
        let a = Scenario::generate(&cfg).unwrap();
        cfg.users.count = 5;
        let b = Scenario::generate(&cfg).unwrap();
        assert_eq!(a.topology, b.topology);
        assert_eq!(&a.ues[..5], &b.ues[..]);
    }

    #[test]
    fn rejects_dangling_service() {
        let s = Scenario::generate(&SimConfig::default()).unwrap();
        let mut ues = s.ues.clone();
        ues[0].service = 9;
        assert!(Scenario::new(s.topology, s.services, ues, 2, 0.1, 0.1).is_err());
    }
}
