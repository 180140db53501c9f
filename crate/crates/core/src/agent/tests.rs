use ndarray::{arr1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn tiny_config() -> AgentConfig {
    AgentConfig {
        batch_size: 4,
        memory_capacity: 64,
        recurrent_width: 4,
        dense_widths: vec![8],
        ..Default::default()
    }
}

/// Frame width 3, history 2, two heads over two nodes.
fn tiny_agent(config: AgentConfig) -> D3qlAgent {
    D3qlAgent::new(config, (3, 2, 2, 3), 42).unwrap()
}

fn experience(seed: u64, terminal: bool) -> Experience {
    let v = seed as f64 * 0.1;
    Experience {
        observation: vec![v, 0.5, -v, 1.0, v * v, 0.0],
        actions: vec![(seed % 3) as usize, ((seed + 1) % 3) as usize],
        reward: 1.0 - v,
        next_observation: vec![0.2, v, 0.0, -v, 1.0, 0.3],
        next_masks: if terminal { Vec::new() } else { vec![ActionMask::all(2); 2] },
        terminal,
    }
}

#[test]
fn argmax_ties_go_to_lowest_allowed_index() {
    let q = arr1(&[1.0, 3.0, 3.0]);
    assert_eq!(masked_argmax(q.view(), &ActionMask::all(2)), 1);
    let skip_one = ActionMask::from_bools(vec![true, false, true]);
    assert_eq!(masked_argmax(q.view(), &skip_one), 2);
    assert_eq!(masked_argmax(q.view(), &ActionMask::idle_only(2)), 0);
}

#[test]
fn targets_for_zero_discount_and_terminal() {
    let online = arr1(&[0.0, 5.0, 2.0, 1.0]);
    let target = arr1(&[3.0, 1.0, 7.0, 4.0]);
    let masks = vec![ActionMask::all(1); 2];
    assert_eq!(double_q_target(0.4, 0.0, false, online.view(), target.view(), &masks), vec![0.4, 0.4]);
    assert_eq!(double_q_target(0.4, 0.9, true, online.view(), target.view(), &masks), vec![0.4, 0.4]);
}

#[test]
fn double_and_plain_targets_differ() {
    // Head 0: online prefers 1, target prefers 0. Head 1: both prefer 0.
    let online = arr1(&[0.0, 5.0, 2.0, 1.0]);
    let target = arr1(&[3.0, 1.0, 7.0, 4.0]);
    let masks = vec![ActionMask::all(1); 2];
    let double = double_q_target(1.0, 0.5, false, online.view(), target.view(), &masks);
    let plain = plain_q_target(1.0, 0.5, false, target.view(), &masks);
    assert_eq!(double, vec![1.5, 4.5]);
    assert_eq!(plain, vec![2.5, 4.5]);
    // A mask that hides the online favourite moves the pick.
    let masks = vec![ActionMask::from_bools(vec![true, false]), ActionMask::all(1)];
    assert_eq!(double_q_target(1.0, 0.5, false, online.view(), target.view(), &masks), vec![2.5, 4.5]);
}

#[test]
fn double_equals_plain_when_networks_agree() {
    let mut agent = tiny_agent(tiny_config());
    for i in 0..8 {
        agent.remember(experience(i, false));
    }
    agent.train_step();
    assert_ne!(agent.online, agent.target);
    for _ in 0..agent.config.target_sync_period {
        agent.sync_and_decay();
    }
    assert_eq!(agent.online, agent.target);
    let x = Array2::from_shape_vec((1, 6), experience(3, false).next_observation).unwrap();
    let q = agent.online.q_values(&x.view()).unwrap();
    let masks = vec![ActionMask::all(2); 2];
    let double = double_q_target(0.3, 0.9, false, q.row(0), q.row(0), &masks);
    assert_eq!(double, plain_q_target(0.3, 0.9, false, q.row(0), &masks));
}

#[test]
fn full_exploration_is_uniform_over_the_mask() {
    let mut agent = tiny_agent(tiny_config());
    agent.epsilon = 1.0;
    let masks = vec![ActionMask::all(2), ActionMask::from_bools(vec![true, false, true])];
    let obs = vec![0.1; 6];
    let mut counts = [[0usize; 3]; 2];
    let draws = 6000;
    for _ in 0..draws {
        let a = agent.act(&obs, &masks);
        counts[0][a[0]] += 1;
        counts[1][a[1]] += 1;
    }
    for c in counts[0] {
        assert!((c as f64 / draws as f64 - 1.0 / 3.0).abs() < 0.03, "{counts:?}");
    }
    assert_eq!(counts[1][1], 0);
    assert!((counts[1][0] as f64 / draws as f64 - 0.5).abs() < 0.03);
}

#[test]
fn greedy_follows_crafted_weights() {
    let mut agent = tiny_agent(tiny_config());
    agent.epsilon = 0.0;
    let mut net = agent.online.zeros_like();
    // Raw outputs: advantages [0, 0, 1 | 0, 2, 0], values [0, 0].
    net.output.bias[2] = 1.0;
    net.output.bias[4] = 2.0;
    agent.online = net;
    let obs = vec![0.3; 6];
    assert_eq!(agent.act(&obs, &[ActionMask::all(2), ActionMask::all(2)]), vec![2, 1]);
    let hide = ActionMask::from_bools(vec![true, true, false]);
    assert_eq!(agent.act(&obs, &[hide.clone(), ActionMask::all(2)]), vec![0, 1]);
    assert_eq!(agent.act_greedy(&obs, &[hide, ActionMask::idle_only(2)]), vec![0, 0]);
}

#[test]
fn idle_only_mask_always_idles() {
    let mut agent = tiny_agent(tiny_config());
    let masks = vec![ActionMask::idle_only(2); 2];
    for eps in [0.0, 0.5, 1.0] {
        agent.epsilon = eps;
        for _ in 0..50 {
            assert_eq!(agent.act(&[0.0; 6], &masks), vec![0, 0]);
        }
    }
}

#[test]
fn epsilon_decays_to_the_floor() {
    let mut agent = tiny_agent(tiny_config());
    for _ in 0..1000 {
        agent.sync_and_decay();
    }
    assert!((agent.epsilon - 0.99995f64.powi(1000)).abs() < 1e-12);
    assert!((agent.epsilon - 0.951229).abs() < 1e-6);
    agent.epsilon = agent.config.epsilon_floor * 1.00001;
    agent.sync_and_decay();
    assert_eq!(agent.epsilon, agent.config.epsilon_floor);
    agent.sync_and_decay();
    assert_eq!(agent.epsilon, agent.config.epsilon_floor);
}

#[test]
fn target_syncs_every_period() {
    let mut agent = tiny_agent(tiny_config());
    let mut params = agent.online.flat_params();
    params[0] += 1.0;
    agent.online.set_flat_params(&params).unwrap();
    for _ in 0..149 {
        agent.sync_and_decay();
    }
    assert_ne!(agent.online, agent.target);
    agent.sync_and_decay();
    assert_eq!(agent.steps, 150);
    assert_eq!(agent.online, agent.target);
}

#[test]
fn no_update_until_a_batch_is_stored() {
    let mut agent = tiny_agent(tiny_config());
    for i in 0..3 {
        agent.remember(experience(i, false));
        assert_eq!(agent.train_step(), None);
    }
    agent.remember(experience(3, false));
    assert!(agent.train_step().is_some());
    assert_eq!(agent.updates, 1);
}

#[test]
fn zero_learning_rate_leaves_weights_untouched() {
    let mut agent = tiny_agent(AgentConfig {
        learning_rate: 0.0,
        ..tiny_config()
    });
    for i in 0..10 {
        agent.remember(experience(i, i % 4 == 0));
    }
    let before: Vec<u64> = agent.online.flat_params().iter().map(|p| p.to_bits()).collect();
    assert!(agent.train_step().unwrap() > 0.0);
    let after: Vec<u64> = agent.online.flat_params().iter().map(|p| p.to_bits()).collect();
    assert_eq!(before, after);
}

#[test]
fn loss_vanishes_when_q_matches_targets() {
    let mut agent = tiny_agent(tiny_config());
    agent.online = agent.online.zeros_like();
    agent.target = agent.online.clone();
    for i in 0..6 {
        let mut e = experience(i, i % 2 == 0);
        e.reward = 0.0;
        agent.remember(e);
    }
    assert_eq!(agent.train_step(), Some(0.0));
    assert!(agent.online.flat_params().iter().all(|&p| p == 0.0));
}

#[test]
fn loss_matches_hand_computation() {
    // Zero network, one terminal sample: loss = mean over heads of ρ².
    let mut agent = tiny_agent(AgentConfig {
        batch_size: 1,
        learning_rate: 0.0,
        ..tiny_config()
    });
    agent.online = agent.online.zeros_like();
    let mut e = experience(1, true);
    e.reward = 0.5;
    agent.remember(e);
    assert!((agent.train_step().unwrap() - 0.25).abs() < 1e-15);
}

#[test]
fn repeated_steps_fit_a_single_sample() {
    for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
        let mut agent = tiny_agent(AgentConfig {
            batch_size: 1,
            memory_capacity: 1,
            learning_rate: 0.01,
            optimizer,
            ..tiny_config()
        });
        agent.remember(experience(2, true));
        let first = agent.train_step().unwrap();
        let mut last = first;
        for _ in 0..200 {
            last = agent.train_step().unwrap();
        }
        assert!(last < 0.1 * first, "{optimizer:?}: {first} -> {last}");
    }
}

#[test]
fn memory_evicts_oldest() {
    let mut memory = ReplayMemory::new(5000);
    for i in 0..5001 {
        memory.push(experience(i, false));
    }
    assert_eq!(memory.len(), 5000);
    assert_eq!(memory.iter().next().unwrap(), &experience(1, false));
    assert_eq!(memory.iter().last().unwrap(), &experience(5000, false));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let sample = memory.sample(32, &mut rng);
    assert_eq!(sample.len(), 32);
    let mut rewards: Vec<u64> = sample.iter().map(|e| e.reward.to_bits()).collect();
    rewards.sort_unstable();
    rewards.dedup();
    assert_eq!(rewards.len(), 32);
}

fn trained(optimizer: OptimizerKind) -> D3qlAgent {
    let mut agent = tiny_agent(AgentConfig {
        optimizer,
        ..tiny_config()
    });
    for i in 0..12 {
        agent.remember(experience(i, i % 5 == 0));
        agent.train_step();
        agent.sync_and_decay();
    }
    agent
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    for optimizer in [OptimizerKind::Sgd, OptimizerKind::Adam] {
        let agent = trained(optimizer);
        let mut bytes = Vec::new();
        save_checkpoint(&agent, &mut bytes).unwrap();
        let restored = load_checkpoint(&bytes[..]).unwrap();
        assert_eq!(restored.online, agent.online);
        assert_eq!(restored.target, agent.target);
        assert_eq!(restored.optimizer, agent.optimizer);
        assert_eq!(restored.config, agent.config);
        assert_eq!(restored.epsilon.to_bits(), agent.epsilon.to_bits());
        assert_eq!((restored.steps, restored.updates, restored.seed), (agent.steps, agent.updates, agent.seed));
        assert!(restored.memory.is_empty());

        let mut again = Vec::new();
        save_checkpoint(&restored, &mut again).unwrap();
        assert_eq!(bytes, again);
    }
}

#[test]
fn resumed_agent_continues_the_schedule() {
    let agent = trained(OptimizerKind::Sgd);
    let mut bytes = Vec::new();
    save_checkpoint(&agent, &mut bytes).unwrap();
    let mut resumed = load_checkpoint(&bytes[..]).unwrap();
    let mut original = agent.clone();
    for _ in 0..150 {
        original.sync_and_decay();
        resumed.sync_and_decay();
    }
    assert_eq!(resumed.epsilon.to_bits(), original.epsilon.to_bits());
    assert_eq!(resumed.target, original.target);
    let obs = [0.2; 6];
    let masks = vec![ActionMask::all(2); 2];
    assert_eq!(resumed.act_greedy(&obs, &masks), original.act_greedy(&obs, &masks));
}

#[test]
fn corrupt_checkpoints_are_rejected() {
    let agent = trained(OptimizerKind::Adam);
    let mut bytes = Vec::new();
    save_checkpoint(&agent, &mut bytes).unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(load_checkpoint(&bad[..]), Err(CheckpointError::Magic)));
    let mut bad = bytes.clone();
    bad[8] = 9;
    assert!(matches!(load_checkpoint(&bad[..]), Err(CheckpointError::Version(9))));
    assert!(matches!(load_checkpoint(&bytes[..bytes.len() - 4]), Err(CheckpointError::Io(_))));
}
