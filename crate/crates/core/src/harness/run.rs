use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;

use super::metrics::{aggregate, moving_average, write_csv, MetricRow, OracleRow};
use super::plan::{ExperimentPlan, Mode};
use super::svg::{line_chart, Series};
use super::HarnessError;
use crate::agent::{load_checkpoint, save_checkpoint, AgentConfig, D3qlAgent};
use crate::config::{AccessMode, ConfigFile};
use crate::mac::GreedyAccess;
use crate::oracle::{random_instance, solve_exact, SolverLimits};
use crate::policy::{GreedyPolicy, LearningPolicy, PlacementPolicy, PolicyKind, RandomPolicy};
use crate::rng::{derive_seed, stream_rng, Stream};
use crate::scenario::Scenario;
use crate::sim::{frame_width, run_episode, run_fig2, EpisodeSpec, MobilityModel};
use crate::trace::{write_trace, Instance};

/// Picks one column of a sweep aggregate for charting.
type Metric = fn(&super::AggregateRow) -> f64;

/// Evaluation episodes draw mobility from indices disjoint from training.
pub const EVAL_EPISODE_OFFSET: u64 = 1 << 32;

/// A fixed network and episode shape; episodes differ only in mobility.
#[derive(Debug, Clone)]
pub struct World {
    pub scenario: Scenario,
    pub spec: EpisodeSpec,
    pub access: AccessMode,
}

impl World {
    pub fn from_config(cfg: &ConfigFile) -> Result<Self, HarnessError> {
        let sim = cfg.sim();
        sim.validate()?;
        Ok(Self {
            scenario: Scenario::generate(&sim)?,
            spec: EpisodeSpec::from_config(&sim),
            access: sim.access.mode,
        })
    }

    /// Replays the instance's association trajectory.
    pub fn from_instance(instance: &Instance, history: usize) -> Self {
        Self {
            scenario: instance.scenario.clone(),
            spec: EpisodeSpec {
                frames: instance.horizon(),
                history,
                mobility: MobilityModel::Scripted(instance.association.clone()),
            },
            access: AccessMode::PerBs,
        }
    }

    /// Frame width, history depth, heads and actions per head.
    pub fn network_shape(&self) -> (usize, usize, usize, usize) {
        let (n, u) = (self.scenario.node_count(), self.scenario.ue_count());
        (frame_width(n, u), self.spec.history, u, n + 1)
    }
}

fn kind_index(kind: PolicyKind) -> u64 {
    PolicyKind::ALL.iter().position(|&k| k == kind).unwrap_or(0) as u64
}

/// Fresh agent for `kind` in `world`; each policy gets its own seed stream.
pub fn new_agent(world: &World, config: &AgentConfig, kind: PolicyKind, seed: u64) -> Result<D3qlAgent, HarnessError> {
    let agent_seed = derive_seed(seed, Stream::Policy, kind_index(kind));
    Ok(D3qlAgent::new(config.clone(), world.network_shape(), agent_seed)?)
}

fn check_shape(agent: &D3qlAgent, world: &World, path: &Path) -> Result<(), HarnessError> {
    let (fw, history, heads, actions) = world.network_shape();
    let spec = agent.online.spec();
    if (spec.frame_width, spec.history, spec.heads, spec.actions_per_head) != (fw, history, heads, actions) {
        return Err(HarnessError::Plan(format!(
            "checkpoint {} was trained for {} users and {} actions, this world has {heads} and {actions}",
            path.display(),
            spec.heads,
            spec.actions_per_head
        )));
    }
    Ok(())
}

pub fn build_policy(
    kind: PolicyKind,
    agent: Option<D3qlAgent>,
    training: bool,
    rng: ChaCha8Rng,
) -> Result<Box<dyn PlacementPolicy>, HarnessError> {
    Ok(match kind {
        PolicyKind::Greedy => Box::new(GreedyPolicy),
        PolicyKind::Random => Box::new(RandomPolicy::new(rng)),
        learning => {
            let agent = agent.ok_or_else(|| HarnessError::Plan(format!("policy {learning} needs a trained agent")))?;
            Box::new(LearningPolicy::new(learning, agent, training))
        }
    })
}

/// Trains `agent` for `episodes` episodes, continuing its episode count.
/// `on_checkpoint` runs every `checkpoint_every` episodes with the number of
/// episodes completed so far.
#[allow(clippy::too_many_arguments)]
pub fn train_policy(
    world: &World,
    agent: D3qlAgent,
    kind: PolicyKind,
    seed: u64,
    episodes: usize,
    run_id: &str,
    sweep_value: Option<usize>,
    checkpoint_every: usize,
    mut on_checkpoint: impl FnMut(&D3qlAgent, usize) -> Result<(), HarnessError>,
) -> Result<(Vec<MetricRow>, D3qlAgent), HarnessError> {
    if !kind.is_learning() {
        return Err(HarnessError::Plan(format!("policy {kind} does not learn")));
    }
    let start = (agent.steps / world.spec.frames as u64) as usize;
    let mut policy = LearningPolicy::new(kind, agent, true);
    let mut mac = GreedyAccess { mode: world.access };
    let mut rows = Vec::with_capacity(episodes);
    for episode in start..start + episodes {
        let clock = Instant::now();
        let mut rng = stream_rng(seed, Stream::Mobility, episode as u64);
        let result = run_episode(&world.scenario, &world.spec, &mut mac, &mut policy, &mut rng)?;
        let mut row = MetricRow::from_episode(run_id, seed, &kind.to_string(), sweep_value, episode, &result.metrics);
        row.loss = policy.take_mean_loss();
        row.epsilon = Some(policy.agent.epsilon);
        row.wall_time_s = clock.elapsed().as_secs_f64();
        rows.push(row);
        let done = episode + 1;
        if (done - start).is_multiple_of(checkpoint_every) {
            on_checkpoint(&policy.agent, done)?;
        }
        if done.is_multiple_of(100) {
            log::info!("{run_id}: {kind} seed {seed} episode {done}, epsilon {:.4}", policy.agent.epsilon);
        }
    }
    Ok((rows, policy.agent))
}

/// Greedy evaluation episodes; learning policies act with exploration off
/// and do not update.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_policy(
    world: &World,
    kind: PolicyKind,
    seed: u64,
    agent: Option<&D3qlAgent>,
    episodes: usize,
    run_id: &str,
    sweep_value: Option<usize>,
) -> Result<Vec<MetricRow>, HarnessError> {
    let rng = stream_rng(seed, Stream::Policy, EVAL_EPISODE_OFFSET + kind_index(kind));
    let mut policy = build_policy(kind, agent.cloned(), false, rng)?;
    let mut mac = GreedyAccess { mode: world.access };
    let mut rows = Vec::with_capacity(episodes);
    for e in 0..episodes {
        let clock = Instant::now();
        let mut rng = stream_rng(seed, Stream::Mobility, EVAL_EPISODE_OFFSET + e as u64);
        let result = run_episode(&world.scenario, &world.spec, &mut mac, policy.as_mut(), &mut rng)?;
        let mut row = MetricRow::from_episode(run_id, seed, &kind.to_string(), sweep_value, e, &result.metrics);
        row.wall_time_s = clock.elapsed().as_secs_f64();
        rows.push(row);
    }
    Ok(rows)
}

/// Runs `jobs` closures on up to `workers` threads; results keep job order.
pub fn fan_out<T: Send>(jobs: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.clamp(1, jobs.max(1)) {
            scope.spawn(|| loop {
                let job = next.fetch_add(1, Ordering::Relaxed);
                if job >= jobs {
                    break;
                }
                let value = f(job);
                results.lock().expect("no worker panicked while holding the lock")[job] = Some(value);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|v| v.expect("every job ran"))
        .collect()
}

/// What a run produced.
#[derive(Debug, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Human-readable summary lines.
    pub lines: Vec<String>,
    /// Work that could not be done, with the reason.
    pub skipped: Vec<String>,
    /// Failed built-in checks, such as a policy beating the oracle.
    pub check_failures: usize,
}

impl RunReport {
    fn csv<T: serde::Serialize>(&mut self, path: PathBuf, rows: &[T]) -> Result<(), HarnessError> {
        write_csv(&path, rows)?;
        self.files.push(path);
        Ok(())
    }

    fn text(&mut self, path: PathBuf, content: &str) -> Result<(), HarnessError> {
        std::fs::write(&path, content).map_err(|e| HarnessError::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

fn prepare_output_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| HarnessError::io(dir, e))?;
    std::fs::remove_file(&probe).map_err(|e| HarnessError::io(&probe, e))
}

fn store_checkpoint(agent: &D3qlAgent, path: &Path) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    let tmp = path.with_extension("tmp");
    let file = std::fs::File::create(&tmp).map_err(|e| HarnessError::io(&tmp, e))?;
    save_checkpoint(agent, std::io::BufWriter::new(file))?;
    std::fs::rename(&tmp, path).map_err(|e| HarnessError::io(path, e))
}

fn fetch_checkpoint(path: &Path) -> Result<D3qlAgent, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(load_checkpoint(std::io::BufReader::new(file))?)
}

fn window_mean(values: &[f64], from: usize, to: usize) -> f64 {
    let slice = &values[from..to];
    slice.iter().sum::<f64>() / slice.len().max(1) as f64
}

/// Runs the plan and writes its outputs.
pub fn execute(plan: &ExperimentPlan) -> Result<RunReport, HarnessError> {
    plan.validate()?;
    prepare_output_dir(&plan.output_dir)?;
    match plan.mode {
        Mode::Train => run_train(plan),
        Mode::Eval => run_eval(plan),
        Mode::SweepUsers | Mode::SweepChannels => run_sweep(plan),
        Mode::Oracle => run_oracle(plan),
        Mode::Fig2Demo => run_fig2_demo(plan),
    }
}

fn train_checkpoint_path(plan: &ExperimentPlan, kind: PolicyKind, seed: u64, jobs: usize) -> PathBuf {
    match &plan.checkpoint {
        Some(p) if jobs == 1 && !p.is_dir() => p.clone(),
        Some(dir) if dir.is_dir() => dir.join(format!("{kind}-seed{seed}.ckpt")),
        _ => plan.output_dir.join(format!("{kind}-seed{seed}.ckpt")),
    }
}

fn run_train(plan: &ExperimentPlan) -> Result<RunReport, HarnessError> {
    let jobs: Vec<(PolicyKind, u64)> = plan.policies.iter().flat_map(|&k| plan.seeds.iter().map(move |&s| (k, s))).collect();
    let outcomes = fan_out(jobs.len(), plan.workers, |j| -> Result<_, HarnessError> {
        let (kind, seed) = jobs[j];
        let cfg = plan.point_config(None, seed);
        let world = World::from_config(&cfg)?;
        let path = train_checkpoint_path(plan, kind, seed, jobs.len());
        let agent = if plan.resume && path.exists() {
            let agent = fetch_checkpoint(&path)?;
            check_shape(&agent, &world, &path)?;
            agent
        } else {
            new_agent(&world, &cfg.agent, kind, seed)?
        };
        let run_id = format!("train-{kind}-seed{seed}");
        let (rows, agent) = train_policy(&world, agent, kind, seed, plan.train_episodes, &run_id, None, plan.checkpoint_every, |a, _| {
            store_checkpoint(a, &path)
        })?;
        store_checkpoint(&agent, &path)?;
        Ok((kind, seed, rows, path))
    });
    let mut report = RunReport::default();
    let mut all_rows = Vec::new();
    let (mut reward_series, mut loss_series) = (Vec::new(), Vec::new());
    for outcome in outcomes {
        let (kind, seed, rows, path) = outcome?;
        let rewards: Vec<f64> = rows.iter().map(|r| r.reward).collect();
        if !rows.is_empty() {
            let tenth = (rows.len() / 10).max(1);
            report.lines.push(format!(
                "{kind} seed {seed}: {} episodes, mean reward first 10% {:.4}, last 10% {:.4}",
                rows.len(),
                window_mean(&rewards, 0, tenth),
                window_mean(&rewards, rows.len() - tenth, rows.len())
            ));
        }
        let window = (rows.len() / 50).max(1);
        let xs: Vec<f64> = rows.iter().map(|r| r.episode as f64).collect();
        reward_series.push(Series {
            name: format!("{kind} s{seed}"),
            points: xs.iter().copied().zip(moving_average(&rewards, window)).collect(),
        });
        let losses: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.loss.map(|l| (r.episode as f64, l))).collect();
        let smoothed = moving_average(&losses.iter().map(|p| p.1).collect::<Vec<_>>(), window);
        loss_series.push(Series {
            name: format!("{kind} s{seed}"),
            points: losses.iter().map(|p| p.0).zip(smoothed).collect(),
        });
        report.files.push(path);
        all_rows.extend(rows);
    }
    report.csv(plan.output_dir.join("train.csv"), &all_rows)?;
    if plan.svg {
        report.text(
            plan.output_dir.join("train-reward.svg"),
            &line_chart("Episode reward", "episode", "reward (moving mean)", &reward_series),
        )?;
        report.text(
            plan.output_dir.join("train-loss.svg"),
            &line_chart("Training loss", "episode", "MSE loss (moving mean)", &loss_series),
        )?;
    }
    Ok(report)
}

/// Where evaluation looks for a learning policy's weights.
fn eval_checkpoint_path(plan: &ExperimentPlan, kind: PolicyKind, seed: u64) -> PathBuf {
    let learning = plan.policies.iter().filter(|k| k.is_learning()).count();
    match &plan.checkpoint {
        Some(p) if p.is_dir() => p.join(format!("{kind}-seed{seed}.ckpt")),
        Some(p) if learning == 1 && plan.seeds.len() == 1 => p.clone(),
        _ => plan.output_dir.join(format!("{kind}-seed{seed}.ckpt")),
    }
}

fn run_eval(plan: &ExperimentPlan) -> Result<RunReport, HarnessError> {
    let jobs: Vec<(PolicyKind, u64)> = plan.policies.iter().flat_map(|&k| plan.seeds.iter().map(move |&s| (k, s))).collect();
    let outcomes = fan_out(jobs.len(), plan.workers, |j| -> Result<Result<Vec<MetricRow>, String>, HarnessError> {
        let (kind, seed) = jobs[j];
        let world = World::from_config(&plan.point_config(None, seed))?;
        let agent = if kind.is_learning() {
            let path = eval_checkpoint_path(plan, kind, seed);
            if !path.exists() {
                return Ok(Err(format!("{kind} seed {seed}: no checkpoint at {}", path.display())));
            }
            let agent = fetch_checkpoint(&path)?;
            check_shape(&agent, &world, &path)?;
            Some(agent)
        } else {
            None
        };
        let run_id = format!("eval-{kind}-seed{seed}");
        Ok(Ok(evaluate_policy(&world, kind, seed, agent.as_ref(), plan.eval_episodes, &run_id, None)?))
    });
    let mut report = RunReport::default();
    let mut rows = Vec::new();
    for outcome in outcomes {
        match outcome? {
            Ok(r) => rows.extend(r),
            Err(reason) => report.skipped.push(reason),
        }
    }
    let summary = aggregate(&rows, "eval");
    for s in &summary {
        report.lines.push(format!(
            "{} seed {}: objective {:.4} ± {:.4}, gated quality {:.4}, collisions {:.2}",
            s.policy, s.seed, s.objective_mean, s.objective_std, s.quality_gated_mean, s.collisions_mean
        ));
    }
    report.csv(plan.output_dir.join("eval.csv"), &rows)?;
    report.csv(plan.output_dir.join("eval-summary.csv"), &summary)?;
    Ok(report)
}

fn run_sweep(plan: &ExperimentPlan) -> Result<RunReport, HarnessError> {
    let sweep = plan.sweep_name();
    let ckpt_dir = plan.checkpoint.clone().unwrap_or_else(|| plan.output_dir.join("checkpoints"));
    let jobs: Vec<(usize, u64)> = plan.sweep_values.iter().flat_map(|&v| plan.seeds.iter().map(move |&s| (v, s))).collect();
    let outcomes = fan_out(jobs.len(), plan.workers, |j| -> Result<(Vec<MetricRow>, Vec<String>), HarnessError> {
        let (value, seed) = jobs[j];
        let cfg = plan.point_config(Some(value), seed);
        let world = World::from_config(&cfg)?;
        let (mut rows, mut skipped) = (Vec::new(), Vec::new());
        for &kind in &plan.policies {
            let run_id = format!("{sweep}{value}-{kind}-seed{seed}");
            let agent = if kind.is_learning() {
                let path = ckpt_dir.join(format!("{kind}-{sweep}{value}-seed{seed}.ckpt"));
                if path.exists() {
                    let agent = fetch_checkpoint(&path)?;
                    check_shape(&agent, &world, &path)?;
                    Some(agent)
                } else if plan.train_episodes > 0 {
                    let fresh = new_agent(&world, &cfg.agent, kind, seed)?;
                    let (_, agent) = train_policy(&world, fresh, kind, seed, plan.train_episodes, &run_id, Some(value), plan.checkpoint_every, |a, _| {
                        store_checkpoint(a, &path)
                    })?;
                    store_checkpoint(&agent, &path)?;
                    Some(agent)
                } else {
                    skipped.push(format!("{sweep}={value} {kind} seed {seed}: no checkpoint at {} and training disabled", path.display()));
                    continue;
                }
            } else {
                None
            };
            rows.extend(evaluate_policy(&world, kind, seed, agent.as_ref(), plan.eval_episodes, &run_id, Some(value))?);
        }
        Ok((rows, skipped))
    });
    let mut report = RunReport::default();
    let mut rows = Vec::new();
    for outcome in outcomes {
        let (r, s) = outcome?;
        rows.extend(r);
        report.skipped.extend(s);
    }
    let summary = aggregate(&rows, sweep);
    report.csv(plan.output_dir.join(format!("sweep-{sweep}-episodes.csv")), &rows)?;
    report.csv(plan.output_dir.join(format!("sweep-{sweep}.csv")), &summary)?;
    if !report.skipped.is_empty() {
        let text = report.skipped.join("\n") + "\n";
        report.text(plan.output_dir.join(format!("sweep-{sweep}-skipped.txt")), &text)?;
    }
    // Per policy and value, means over seeds of the per-seed means.
    let curve = |f: fn(&super::AggregateRow) -> f64| -> Vec<Series> {
        plan.policies
            .iter()
            .filter_map(|kind| {
                let name = kind.to_string();
                let points: Vec<(f64, f64)> = plan
                    .sweep_values
                    .iter()
                    .filter_map(|&v| {
                        let cells: Vec<f64> = summary.iter().filter(|s| s.policy == name && s.value == Some(v)).map(f).collect();
                        (!cells.is_empty()).then(|| (v as f64, cells.iter().sum::<f64>() / cells.len() as f64))
                    })
                    .collect();
                (!points.is_empty()).then_some(Series { name, points })
            })
            .collect()
    };
    for s in curve(|s| s.objective_mean) {
        let values: Vec<String> = s.points.iter().map(|p| format!("{}:{:.4}", p.0, p.1)).collect();
        report.lines.push(format!("{} objective by {sweep}: {}", s.name, values.join(" ")));
    }
    if plan.svg {
        let axis = if sweep == "users" { "number of users" } else { "number of channels" };
        let charts: [(&str, &str, Metric); 3] = [
            ("quality", "mean gated quality", |s| s.quality_gated_mean),
            ("collisions", "collisions per episode", |s| s.collisions_mean),
            ("objective", "objective", |s| s.objective_mean),
        ];
        for (file, label, f) in charts {
            let chart = line_chart(&format!("{label} by {axis}"), axis, label, &curve(f));
            report.text(plan.output_dir.join(format!("sweep-{sweep}-{file}.svg")), &chart)?;
        }
    }
    Ok(report)
}

fn run_oracle(plan: &ExperimentPlan) -> Result<RunReport, HarnessError> {
    let jobs: Vec<(u64, usize)> = plan.seeds.iter().flat_map(|&s| (0..plan.instances).map(move |i| (s, i))).collect();
    let limits = SolverLimits::default();
    let outcomes = fan_out(jobs.len(), plan.workers, |j| -> Result<Vec<OracleRow>, HarnessError> {
        let (seed, index) = jobs[j];
        let instance = random_instance(&plan.instance_dims, &mut stream_rng(seed, Stream::Instance, index as u64));
        let solution = solve_exact(&instance, &limits, true)?;
        let world = World::from_instance(&instance, plan.config.episode.history);
        let mut rows = Vec::new();
        for &kind in &plan.policies {
            let agent = if kind.is_learning() {
                let fresh = new_agent(&world, &plan.config.agent, kind, seed ^ index as u64)?;
                let (_, trained) = train_policy(&world, fresh, kind, seed, plan.train_episodes, "oracle", None, usize::MAX, |_, _| Ok(()))?;
                Some(trained)
            } else {
                None
            };
            let run = evaluate_policy(&world, kind, seed ^ index as u64, agent.as_ref(), 1, "oracle", None)?;
            let objective = run[0].objective_total;
            let bound = solution.objective.total;
            rows.push(OracleRow {
                instance: index,
                seed,
                policy: kind.to_string(),
                objective,
                oracle_objective: bound,
                gap: bound - objective,
                oracle_visits: solution.visits,
                within_bound: objective <= bound,
            });
        }
        Ok(rows)
    });
    let mut report = RunReport::default();
    let mut rows = Vec::new();
    for outcome in outcomes {
        rows.extend(outcome?);
    }
    report.check_failures = rows.iter().filter(|r| !r.within_bound).count();
    for &kind in &plan.policies {
        let name = kind.to_string();
        let mine: Vec<&OracleRow> = rows.iter().filter(|r| r.policy == name).collect();
        let mean_gap = mine.iter().map(|r| r.gap).sum::<f64>() / mine.len().max(1) as f64;
        let above = mine.iter().filter(|r| !r.within_bound).count();
        report.lines.push(format!("{name}: mean gap to optimum {mean_gap:.4} over {} instances, {above} above the bound", mine.len()));
    }
    report.csv(plan.output_dir.join("oracle.csv"), &rows)?;
    Ok(report)
}

fn run_fig2_demo(plan: &ExperimentPlan) -> Result<RunReport, HarnessError> {
    let demo = run_fig2()?;
    let mut report = RunReport::default();
    let path = plan.output_dir.join("fig2-trace.jsonl");
    let mut buf = Vec::new();
    write_trace(&mut buf, &demo.result.instance, &demo.result.events)?;
    std::fs::write(&path, buf).map_err(|e| HarnessError::io(&path, e))?;
    report.files.push(path);
    report.text(plan.output_dir.join("fig2-narrative.txt"), &(demo.narrative.join("\n") + "\n"))?;
    report.lines = demo.narrative;
    Ok(report)
}
