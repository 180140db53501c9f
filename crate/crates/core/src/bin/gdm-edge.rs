use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gdm_edge::config::ConfigFile;
use gdm_edge::harness::{execute, ExperimentPlan, HarnessError, Mode};
use gdm_edge::oracle::{check_constraints, objective_value};
use gdm_edge::policy::PolicyKind;
use gdm_edge::trace::{read_trace, DecisionTrace};

const USAGE: u8 = 1;
const RUNTIME: u8 = 2;
const CHECK_FAILED: u8 = 3;

/// Uplink access and denoising-block placement experiments.
#[derive(Parser)]
#[command(name = "gdm-edge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand)]
enum Command {
    /// Train a learning policy and write its checkpoint and per-episode metrics.
    Train,
    /// Evaluate policies greedily from checkpoints.
    Eval,
    /// Evaluate every policy over a range of user counts.
    SweepUsers,
    /// Evaluate every policy over a range of channel counts.
    SweepChannels,
    /// Compare policies with the exact optimum on small random instances.
    Oracle,
    /// Replay the scripted two-station walkthrough.
    Fig2Demo,
    /// Check a JSONL trace file against the placement constraints.
    CheckTrace {
        /// Trace written by a run or by fig2-demo.
        file: PathBuf,
    },
}

#[derive(Args)]
struct Options {
    /// TOML configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Several master seeds, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Training episodes per learning policy.
    #[arg(long, global = true)]
    episodes: Option<usize>,
    /// Evaluation episodes per policy and seed.
    #[arg(long, global = true)]
    eval_episodes: Option<usize>,
    /// Policies, comma separated: learn-gdm, mp, fp, gr, random.
    #[arg(long, global = true, value_delimiter = ',')]
    policy: Vec<PolicyKind>,
    /// Checkpoint file (train, eval) or directory (sweeps).
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Episodes between checkpoint writes.
    #[arg(long, global = true)]
    checkpoint_every: Option<usize>,
    /// Continue training from an existing checkpoint.
    #[arg(long, global = true)]
    resume: bool,
    /// Sweep values, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    values: Vec<usize>,
    /// Worker threads for independent runs.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Random instances for the oracle comparison.
    #[arg(long, global = true)]
    instances: Option<usize>,
    /// Skip SVG charts.
    #[arg(long, global = true)]
    no_svg: bool,
}

fn load_config(opts: &Options) -> Result<ConfigFile, String> {
    let mut cfg = match &opts.config {
        Some(path) => ConfigFile::load(path).map_err(|e| e.to_string())?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn build_plan(mode: Mode, opts: &Options, config: ConfigFile) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(mode, config, &opts.out);
    if !opts.seeds.is_empty() {
        plan.seeds = opts.seeds.clone();
    }
    if !opts.policy.is_empty() {
        plan.policies = opts.policy.clone();
    }
    if !opts.values.is_empty() {
        plan.sweep_values = opts.values.clone();
    }
    if let Some(n) = opts.episodes {
        plan.train_episodes = n;
    } else if mode == Mode::Oracle {
        plan.train_episodes = 0;
    }
    if let Some(n) = opts.eval_episodes {
        plan.eval_episodes = n;
    }
    if let Some(n) = opts.checkpoint_every {
        plan.checkpoint_every = n;
    }
    if let Some(n) = opts.workers {
        plan.workers = n;
    }
    if let Some(n) = opts.instances {
        plan.instances = n;
    }
    plan.checkpoint = opts.checkpoint.clone();
    plan.resume = opts.resume;
    plan.svg = !opts.no_svg;
    plan
}

fn run_plan(plan: &ExperimentPlan) -> ExitCode {
    match execute(plan) {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for skip in &report.skipped {
                println!("skipped: {skip}");
            }
            for file in &report.files {
                println!("wrote {}", file.display());
            }
            if report.check_failures > 0 {
                eprintln!("{} check(s) failed", report.check_failures);
                ExitCode::from(CHECK_FAILED)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e @ HarnessError::Plan(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(RUNTIME)
        }
    }
}

fn check_trace(path: &Path) -> ExitCode {
    let parsed = File::open(path)
        .map_err(|e| e.to_string())
        .and_then(|f| read_trace(BufReader::new(f)).map_err(|e| e.to_string()))
        .and_then(|(instance, events)| {
            let trace = DecisionTrace::from_events(instance.horizon(), &events).map_err(|e| e.to_string())?;
            let report = check_constraints(&instance, &trace).map_err(|e| e.to_string())?;
            Ok((instance, trace, report))
        });
    let (instance, trace, report) = match parsed {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(RUNTIME);
        }
    };
    for v in &report.violations {
        println!("{v}");
    }
    if !report.is_feasible() {
        println!("{} violation(s)", report.violations.len());
        return ExitCode::from(CHECK_FAILED);
    }
    match objective_value(&instance, &trace) {
        Ok(obj) => println!(
            "feasible; objective {:.6} (quality {:.6}, execution {:.6}, transfer {:.6})",
            obj.total, obj.quality, obj.execution, obj.transfer
        ),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(RUNTIME);
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let mode = match &cli.command {
        Command::CheckTrace { file } => return check_trace(file),
        Command::Train => Mode::Train,
        Command::Eval => Mode::Eval,
        Command::SweepUsers => Mode::SweepUsers,
        Command::SweepChannels => Mode::SweepChannels,
        Command::Oracle => Mode::Oracle,
        Command::Fig2Demo => Mode::Fig2Demo,
    };
    let config = match load_config(&cli.options) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    run_plan(&build_plan(mode, &cli.options, config))
}
