use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::model::{ExecutionPath, GridSpec, Node, NodeId, QualityCurve, Service, Topology, UeProfile};
use crate::scenario::Scenario;
use crate::trace::{DecisionTrace, Execution, Instance, Selection, Transmission};

fn one_user(threshold: f64, channels: usize, frames: usize) -> Instance {
    let grid = GridSpec {
        rows: 1,
        cols: 1,
        cell_size: 10.0,
    };
    let topo = Topology::new(
        vec![Node {
            capacity: 1,
            exec_cost: 1.0,
        }],
        vec![vec![0.0]],
        vec![NodeId(0)],
        grid,
    )
    .unwrap();
    let service = Service::new(
        2,
        QualityCurve::Tabulated {
            values: vec![0.0, 0.3, 0.8],
        },
    )
    .unwrap();
    let scenario = Scenario::new(topo, vec![service], vec![UeProfile { service: 0, threshold }], channels, 0.1, 0.1).unwrap();
    Instance {
        scenario,
        association: vec![vec![NodeId(0)]; frames],
    }
}

fn two_nodes(users: usize, exec_cost: f64) -> Instance {
    let grid = GridSpec {
        rows: 1,
        cols: 2,
        cell_size: 10.0,
    };
    let topo = Topology::new(
        vec![
            Node {
                capacity: 2,
                exec_cost,
            };
            2
        ],
        vec![vec![0.0, 3.0], vec![4.0, 0.0]],
        vec![NodeId(0), NodeId(1)],
        grid,
    )
    .unwrap();
    let service = Service::new(
        4,
        QualityCurve::Tabulated {
            values: vec![0.0, 0.2, 0.45, 0.7, 0.9],
        },
    )
    .unwrap();
    let ues = vec![UeProfile { service: 0, threshold: 0.4 }; users];
    let scenario = Scenario::new(topo, vec![service], ues, 1, 0.1, 0.1).unwrap();
    Instance {
        scenario,
        association: vec![vec![NodeId(0); users]; 4],
    }
}

fn path(nodes: &[usize]) -> ExecutionPath {
    ExecutionPath::new(nodes.iter().map(|&n| NodeId(n)).collect()).unwrap()
}

fn exec(frame: usize, ue: usize, block: usize, node: usize) -> Execution {
    Execution {
        frame,
        ue,
        block,
        node: NodeId(node),
    }
}

#[test]
fn empty_trace_is_feasible_and_worth_nothing() {
    let inst = two_nodes(2, 2.0);
    let trace = DecisionTrace::empty(4);
    assert!(check_constraints(&inst, &trace).unwrap().is_feasible());
    assert_eq!(objective_value(&inst, &trace).unwrap().total, 0.0);
}

#[test]
fn missing_second_block_violates_c1() {
    let inst = two_nodes(1, 2.0);
    let trace = DecisionTrace {
        horizon: 4,
        selections: vec![Selection {
            frame: 1,
            ue: 0,
            path: path(&[0, 1]),
        }],
        executions: vec![exec(1, 0, 1, 0)],
        transmissions: vec![Transmission {
            frame: 0,
            ue: 0,
            channel: 0,
        }],
    };
    let report = check_constraints(&inst, &trace).unwrap();
    assert_eq!(report.count(Constraint::C1), 1);
    assert_eq!(report.violations.len(), 1);
}

#[test]
fn shared_channel_violates_c5() {
    let inst = two_nodes(2, 2.0);
    let trace = DecisionTrace {
        horizon: 4,
        transmissions: vec![
            Transmission {
                frame: 2,
                ue: 0,
                channel: 0,
            },
            Transmission {
                frame: 2,
                ue: 1,
                channel: 0,
            },
        ],
        ..DecisionTrace::empty(4)
    };
    let report = check_constraints(&inst, &trace).unwrap();
    assert_eq!(report.count(Constraint::C5), 1);
}

#[test]
fn selection_without_upload_violates_c6_and_low_quality_c8() {
    let inst = two_nodes(1, 2.0);
    let trace = DecisionTrace {
        horizon: 4,
        selections: vec![Selection {
            frame: 0,
            ue: 0,
            path: path(&[0]),
        }],
        executions: vec![exec(0, 0, 1, 0)],
        transmissions: vec![],
    };
    let report = check_constraints(&inst, &trace).unwrap();
    assert_eq!(report.count(Constraint::C6), 1);
    assert_eq!(report.count(Constraint::C8), 1);
}

#[test]
fn out_of_range_variables_are_structural_errors() {
    let inst = two_nodes(1, 2.0);
    let mut trace = DecisionTrace::empty(4);
    trace.executions.push(exec(0, 0, 1, 7));
    assert!(matches!(check_constraints(&inst, &trace), Err(OracleError::Structure(_))));
    let mut trace = DecisionTrace::empty(4);
    trace.executions.push(exec(0, 0, 1, 0));
    trace.executions.push(exec(0, 0, 1, 0));
    assert!(matches!(check_constraints(&inst, &trace), Err(OracleError::Structure(_))));
    assert!(check_constraints(&inst, &DecisionTrace::empty(3)).is_err());
}

#[test]
fn hand_evaluated_objective() {
    // Path (0, 0) on a node with cost 2: 0.45 − 0.1·(2 + 2) − 0.
    let inst = two_nodes(1, 2.0);
    let trace = DecisionTrace {
        horizon: 4,
        selections: vec![Selection {
            frame: 1,
            ue: 0,
            path: path(&[0, 0]),
        }],
        executions: vec![exec(1, 0, 1, 0), exec(2, 0, 2, 0)],
        transmissions: vec![Transmission {
            frame: 0,
            ue: 0,
            channel: 0,
        }],
    };
    assert!(check_constraints(&inst, &trace).unwrap().is_feasible());
    let obj = objective_value(&inst, &trace).unwrap();
    assert_eq!(obj.quality, 0.45);
    assert_eq!(obj.execution, 4.0);
    assert_eq!(obj.transfer, 0.0);
    assert!((obj.total - 0.05).abs() < 1e-12);
}

#[test]
fn transfer_terms_use_neighbouring_frames() {
    // Request PoA 0 at frame 0, path (1,), delivered at frame 2 to PoA 0:
    // head 3 + tail 4.
    let mut inst = two_nodes(1, 2.0);
    inst.association = vec![vec![NodeId(0)], vec![NodeId(1)], vec![NodeId(0)], vec![NodeId(1)]];
    let trace = DecisionTrace {
        horizon: 4,
        selections: vec![Selection {
            frame: 1,
            ue: 0,
            path: path(&[1]),
        }],
        executions: vec![exec(1, 0, 1, 1)],
        transmissions: vec![Transmission {
            frame: 0,
            ue: 0,
            channel: 0,
        }],
    };
    assert_eq!(objective_value(&inst, &trace).unwrap().transfer, 7.0);
}

#[test]
fn execution_cost_scaling_moves_only_its_term() {
    let trace = DecisionTrace {
        horizon: 4,
        selections: vec![Selection {
            frame: 1,
            ue: 0,
            path: path(&[0, 1]),
        }],
        executions: vec![exec(1, 0, 1, 0), exec(2, 0, 2, 1)],
        transmissions: vec![Transmission {
            frame: 0,
            ue: 0,
            channel: 0,
        }],
    };
    let base = objective_value(&two_nodes(1, 2.0), &trace).unwrap();
    let scaled = objective_value(&two_nodes(1, 6.0), &trace).unwrap();
    assert_eq!(scaled.quality, base.quality);
    assert_eq!(scaled.transfer, base.transfer);
    assert_eq!(scaled.execution, 3.0 * base.execution);
}

#[test]
fn solver_finds_two_block_chain() {
    let inst = one_user(0.5, 1, 3);
    for prune in [true, false] {
        let sol = solve_exact(&inst, &SolverLimits::default(), prune).unwrap();
        assert!((sol.objective.total - 0.6).abs() < 1e-12, "{:?}", sol.objective);
        assert_eq!(sol.trace.transmissions, vec![Transmission { frame: 0, ue: 0, channel: 0 }]);
        assert_eq!(sol.trace.executions, vec![exec(1, 0, 1, 0), exec(2, 0, 2, 0)]);
        assert!(check_constraints(&inst, &sol.trace).unwrap().is_feasible());
    }
}

#[test]
fn unreachable_threshold_gives_empty_optimum() {
    let inst = one_user(0.9, 1, 3);
    let sol = solve_exact(&inst, &SolverLimits::default(), true).unwrap();
    assert_eq!(sol.objective.total, 0.0);
    assert_eq!(sol.trace, DecisionTrace::empty(3));
}

#[test]
fn no_channels_gives_empty_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let dims = InstanceDims {
            channels: 0,
            ..Default::default()
        };
        let inst = random_instance(&dims, &mut rng);
        let sol = solve_exact(&inst, &SolverLimits::default(), true).unwrap();
        assert_eq!(sol.trace, DecisionTrace::empty(dims.frames));
    }
}

#[test]
fn oversized_instances_are_refused() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dims = InstanceDims {
        nodes: 4,
        ..Default::default()
    };
    let inst = random_instance(&dims, &mut rng);
    assert!(matches!(
        solve_exact(&inst, &SolverLimits::default(), true),
        Err(OracleError::TooLarge(_))
    ));
    let tight = SolverLimits {
        max_log10_size: 1.0,
        ..Default::default()
    };
    let small = random_instance(&InstanceDims::default(), &mut rng);
    assert!(matches!(solve_exact(&small, &tight, true), Err(OracleError::TooLarge(_))));
    let starved = SolverLimits {
        max_visits: 10,
        ..Default::default()
    };
    assert!(matches!(solve_exact(&small, &starved, true), Err(OracleError::Budget(10))));
}

#[test]
fn pruning_preserves_the_optimum_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dims = InstanceDims {
        users: 2,
        frames: 4,
        ..Default::default()
    };
    for _ in 0..10 {
        let inst = random_instance(&dims, &mut rng);
        let fast = solve_exact(&inst, &SolverLimits::default(), true).unwrap();
        let full = solve_exact(&inst, &SolverLimits::default(), false).unwrap();
        assert_eq!(fast.objective.total.to_bits(), full.objective.total.to_bits());
        assert!(fast.visits <= full.visits);
        assert!(check_constraints(&inst, &fast.trace).unwrap().is_feasible());
    }
}
