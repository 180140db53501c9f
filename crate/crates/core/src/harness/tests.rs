use super::*;
use crate::config::ConfigFile;
use crate::policy::PolicyKind;
use crate::sim::EpisodeMetrics;

fn tiny_config() -> ConfigFile {
    let mut cfg = ConfigFile::parse(
        "seed = 3\n[grid]\nrows = 2\ncols = 2\nnode_count = 4\n[users]\ncount = 3\n[episode]\nframes = 6\n\
         [agent]\nbatch_size = 4\nmemory_capacity = 64\nrecurrent_width = 8\ndense_widths = [8]\n",
    )
    .unwrap();
    cfg.access.channels = 1;
    cfg
}

fn row(policy: &str, seed: u64, value: Option<usize>, reward: f64) -> MetricRow {
    MetricRow {
        run_id: "r".into(),
        seed,
        policy: policy.into(),
        sweep_value: value,
        episode: 0,
        reward,
        loss: None,
        epsilon: None,
        quality_gated: reward,
        quality_ungated: reward,
        collisions: 1,
        objective_quality: 0.0,
        objective_execution: 0.0,
        objective_transfer: 0.0,
        objective_total: reward,
        wall_time_s: 1.0,
    }
}

fn header(path: &std::path::Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn empty_metrics_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    let err = write_csv::<MetricRow>(&path, &[]).unwrap_err();
    assert!(matches!(err, HarnessError::EmptyMetrics(_)));
    assert!(!path.exists());
}

#[test]
fn headers_follow_the_documented_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    write_csv(&path, &[row("gr", 1, None, 0.5)]).unwrap();
    assert_eq!(header(&path), METRIC_COLUMNS.join(","));
    let body = std::fs::read_to_string(&path).unwrap();
    assert_eq!(body.lines().nth(1).unwrap(), "r,1,gr,,0,0.5,,,0.5,0.5,1,0.0,0.0,0.0,0.5");

    let agg = aggregate(&[row("gr", 1, Some(5), 0.5)], "users");
    write_csv(&path, &agg).unwrap();
    assert_eq!(header(&path), AGGREGATE_COLUMNS.join(","));
}

#[test]
fn aggregates_group_and_use_sample_deviation() {
    let rows = vec![
        row("gr", 1, Some(5), 1.0),
        row("gr", 1, Some(5), 3.0),
        row("gr", 2, Some(5), 4.0),
        row("fp", 1, Some(5), 2.0),
        row("gr", 1, Some(10), 7.0),
    ];
    let agg = aggregate(&rows, "users");
    let keys: Vec<_> = agg.iter().map(|a| (a.value, a.policy.as_str(), a.seed, a.episodes)).collect();
    assert_eq!(keys, vec![(Some(5), "fp", 1, 1), (Some(5), "gr", 1, 2), (Some(5), "gr", 2, 1), (Some(10), "gr", 1, 1)]);
    assert_eq!(agg[1].reward_mean, 2.0);
    assert!((agg[1].reward_std - 2f64.sqrt()).abs() < 1e-15);
    assert_eq!(agg[0].reward_std, 0.0);
}

#[test]
fn moving_average_by_hand() {
    assert_eq!(moving_average(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
    assert_eq!(moving_average(&[2.0, 4.0], 0), vec![2.0, 4.0]);
}

fn polyline_ys(svg: &str) -> Vec<f64> {
    let start = svg.find("points=\"").unwrap() + 8;
    let end = start + svg[start..].find('"').unwrap();
    svg[start..end].split(' ').map(|p| p.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

#[test]
fn rising_series_is_drawn_upwards() {
    let series = Series {
        name: "reward".into(),
        points: (0..20).map(|i| (i as f64, (i as f64).sqrt())).collect(),
    };
    let svg = line_chart("t", "x", "y", std::slice::from_ref(&series));
    let ys = polyline_ys(&svg);
    assert_eq!(ys.len(), 20);
    assert!(ys.windows(2).all(|w| w[1] < w[0]), "{ys:?}");
    assert_eq!(svg, line_chart("t", "x", "y", &[series]));
}

#[test]
fn chart_text_is_escaped() {
    let svg = line_chart("a<b", "x&y", "\"q\"", &[]);
    assert!(svg.contains("a&lt;b") && svg.contains("x&amp;y") && svg.contains("&quot;q&quot;"));
}

#[test]
fn fan_out_keeps_job_order() {
    let out = fan_out(17, 4, |j| j * j);
    assert_eq!(out, (0..17).map(|j| j * j).collect::<Vec<_>>());
    assert!(fan_out(0, 3, |j| j).is_empty());
}

#[test]
fn plans_are_validated() {
    let mut plan = ExperimentPlan::new(Mode::SweepChannels, tiny_config(), "out");
    assert!(plan.validate().is_ok());
    plan.sweep_values = vec![1, 0];
    assert!(plan.validate().is_err());
    plan.sweep_values.clear();
    assert!(plan.validate().is_err());
    let mut plan = ExperimentPlan::new(Mode::Eval, tiny_config(), "out");
    plan.seeds.clear();
    assert!(plan.validate().is_err());
    let mut plan = ExperimentPlan::new(Mode::Train, tiny_config(), "out");
    plan.policies = vec![PolicyKind::Greedy];
    assert!(plan.validate().is_err());
}

#[test]
fn point_config_sets_the_swept_quantity() {
    let plan = ExperimentPlan::new(Mode::SweepUsers, tiny_config(), "out");
    let cfg = plan.point_config(Some(20), 9);
    assert_eq!((cfg.users.count, cfg.seed, cfg.access.channels), (20, 9, 1));
    let plan = ExperimentPlan::new(Mode::SweepChannels, tiny_config(), "out");
    assert_eq!(plan.point_config(Some(4), 9).access.channels, 4);
}

#[test]
fn one_training_episode_gives_one_row_and_a_loadable_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = ExperimentPlan::new(Mode::Train, tiny_config(), dir.path());
    plan.train_episodes = 1;
    let report = execute(&plan).unwrap();
    let text = std::fs::read_to_string(dir.path().join("train.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
    let ckpt = dir.path().join("learn-gdm-seed3.ckpt");
    assert!(report.files.contains(&ckpt));
    let agent = crate::agent::load_checkpoint(std::fs::File::open(&ckpt).unwrap()).unwrap();
    assert_eq!(agent.steps, 6);
}

#[test]
fn resumed_training_continues_counters() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = ExperimentPlan::new(Mode::Train, tiny_config(), dir.path());
    plan.train_episodes = 2;
    execute(&plan).unwrap();
    let ckpt = dir.path().join("learn-gdm-seed3.ckpt");
    let first = crate::agent::load_checkpoint(std::fs::File::open(&ckpt).unwrap()).unwrap();
    plan.resume = true;
    execute(&plan).unwrap();
    let second = crate::agent::load_checkpoint(std::fs::File::open(&ckpt).unwrap()).unwrap();
    assert_eq!(second.steps, first.steps + 12);
    assert!(second.epsilon < first.epsilon);
    let text = std::fs::read_to_string(dir.path().join("train.csv")).unwrap();
    let episodes: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(4).unwrap()).collect();
    assert_eq!(episodes, vec!["2", "3"]);
}

#[test]
fn single_point_sweep_has_one_row_per_policy() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = ExperimentPlan::new(Mode::SweepUsers, tiny_config(), dir.path());
    plan.sweep_values = vec![4];
    plan.train_episodes = 1;
    plan.eval_episodes = 2;
    plan.svg = false;
    let report = execute(&plan).unwrap();
    assert!(report.skipped.is_empty());
    let text = std::fs::read_to_string(dir.path().join("sweep-users.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + PolicyKind::ALL.len());
}

#[test]
fn missing_checkpoints_are_skipped_with_a_reason() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = ExperimentPlan::new(Mode::SweepChannels, tiny_config(), dir.path());
    plan.sweep_values = vec![1];
    plan.train_episodes = 0;
    plan.eval_episodes = 1;
    let report = execute(&plan).unwrap();
    assert_eq!(report.skipped.len(), 3);
    assert!(report.skipped[0].contains("no checkpoint"));
    let text = std::fs::read_to_string(dir.path().join("sweep-channels.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2);
    assert!(dir.path().join("sweep-channels-skipped.txt").exists());
}

#[test]
fn unwritable_output_is_a_startup_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, "x").unwrap();
    let plan = ExperimentPlan::new(Mode::Fig2Demo, tiny_config(), file.join("sub"));
    assert!(matches!(execute(&plan), Err(HarnessError::Io { .. })));
}

#[test]
fn objective_columns_reconcile() {
    let dir = tempfile::tempdir().unwrap();
    let mut plan = ExperimentPlan::new(Mode::Eval, tiny_config(), dir.path());
    plan.policies = vec![PolicyKind::Greedy, PolicyKind::Random];
    plan.eval_episodes = 5;
    execute(&plan).unwrap();
    let mut reader = csv::Reader::from_path(dir.path().join("eval.csv")).unwrap();
    let (alpha, beta) = (plan.config.objective.alpha, plan.config.objective.beta);
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        let (q, e, t, total) = (f(11), f(12), f(13), f(14));
        assert!((q - alpha * e - beta * t - total).abs() < 1e-9);
        rows += 1;
    }
    assert_eq!(rows, 10);
}

#[test]
fn metric_rows_copy_episode_metrics() {
    let m = EpisodeMetrics {
        reward: 1.5,
        quality_gated: 0.4,
        quality_ungated: 0.6,
        sessions: 3,
        selections: 2,
        uploads: 4,
        collisions: 2,
        objective: crate::oracle::ObjectiveBreakdown::new(2.0, 3.0, 1.0, 0.1, 0.1),
    };
    let r = MetricRow::from_episode("run", 7, "gr", Some(5), 9, &m);
    assert_eq!((r.seed, r.episode, r.collisions, r.sweep_value), (7, 9, 2, Some(5)));
    assert!((r.objective_total - 1.6).abs() < 1e-12);
}
