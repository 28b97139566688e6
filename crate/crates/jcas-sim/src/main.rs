use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use jcas_sim::config::SimConfig;
use jcas_sim::error::{Result, SimError};
use jcas_sim::harness::{evaluate, sweep, write_metrics_csv, SweepSpec};
use jcas_sim::policy::ppo::{Checkpoint, Trainer, TRAINING_LOG_HEADER};
use jcas_sim::policy::PolicyRegistry;

#[derive(Parser)]
#[command(
    name = "jcas-sim",
    version,
    about = "Multi-UAV joint communication and sensing mission simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one policy over seeded Monte Carlo episodes
    Eval(EvalArgs),
    /// Train the shared policy, writing checkpoints and an iteration log
    Train(TrainArgs),
    /// Evaluate the cross product of policies, fleet sizes, and target counts
    Sweep(SweepArgs),
}

#[derive(Args)]
struct EvalArgs {
    /// Policy name: random, constant-pilot, adaptive-pilot, or checkpoint
    #[arg(long, default_value = "random")]
    policy: String,
    /// Fleet size (overrides the config)
    #[arg(long)]
    n_uavs: Option<usize>,
    /// Hotspot count (overrides the config)
    #[arg(long)]
    n_targets: Option<usize>,
    /// Episodes to run (overrides the config)
    #[arg(long)]
    episodes: Option<usize>,
    /// Base seed; episode i uses an independent stream derived from it
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config file; omitted sections keep the standard defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metrics CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for episode parallelism; 0 uses the global pool
    #[arg(long)]
    workers: Option<usize>,
    /// Directory receiving one JSON-lines trace per episode
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Checkpoint file backing the `checkpoint` policy
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training iterations to run in this invocation
    #[arg(long, default_value_t = 40)]
    iterations: u32,
    /// TOML config file; omitted sections keep the standard defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training seed; ignored when resuming from an existing checkpoint
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for checkpoints and training_log.csv; resumes from its
    /// latest.json when present
    #[arg(long)]
    checkpoint_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Comma-separated policy names
    #[arg(long, value_delimiter = ',', default_value = "random")]
    policies: Vec<String>,
    /// Comma-separated fleet sizes
    #[arg(long, value_delimiter = ',', default_value = "5,10,15,20")]
    n_uavs: Vec<usize>,
    /// Comma-separated hotspot counts
    #[arg(long, value_delimiter = ',', default_value = "3")]
    n_targets: Vec<usize>,
    /// Episodes per cell (overrides the config)
    #[arg(long)]
    episodes: Option<usize>,
    /// Base seed shared by every cell, pairing their episode streams
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config file; omitted sections keep the standard defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Metrics CSV destination (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for episode parallelism; 0 uses the global pool
    #[arg(long)]
    workers: Option<usize>,
    /// Root directory for traces, one subdirectory per sweep cell
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Checkpoint file backing the `checkpoint` policy
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn load_config(path: Option<&Path>) -> Result<SimConfig> {
    match path {
        Some(p) => SimConfig::load(p),
        None => Ok(SimConfig::default()),
    }
}

fn build_registry(checkpoint: Option<&Path>, wants_checkpoint: bool) -> Result<PolicyRegistry> {
    let mut registry = PolicyRegistry::builtin();
    match checkpoint {
        Some(path) => registry.register_checkpoint("checkpoint", path)?,
        None if wants_checkpoint => {
            return Err(SimError::Config(
                "the checkpoint policy needs --checkpoint <file>".into(),
            ))
        }
        None => {}
    }
    Ok(registry)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(n) = args.n_uavs {
        cfg.env.n_uavs = n;
    }
    if let Some(k) = args.n_targets {
        cfg.env.n_targets = k;
    }
    let episodes = args.episodes.unwrap_or(cfg.eval.episodes);
    let seed = args.seed.unwrap_or(cfg.eval.base_seed);
    let workers = args.workers.unwrap_or(cfg.eval.workers);
    let registry = build_registry(args.checkpoint.as_deref(), args.policy == "checkpoint")?;
    let outcome = evaluate(
        &cfg,
        &registry,
        &args.policy,
        episodes,
        seed,
        workers,
        args.trace_dir.as_deref(),
    )?;
    write_metrics_csv(open_out(args.out.as_deref())?, &[outcome.summary])
}

fn run_train(args: TrainArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let dir = args.checkpoint_dir.as_deref();
    let resume_from = dir.map(|d| d.join("latest.json")).filter(|p| p.exists());
    let mut trainer = match &resume_from {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            eprintln!(
                "resuming from {} at iteration {}",
                path.display(),
                ckpt.iteration
            );
            Trainer::from_checkpoint(&cfg, &ckpt)?
        }
        None => Trainer::new(&cfg, args.seed.unwrap_or(0))?,
    };
    let rows = trainer.train(args.iterations, dir)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{TRAINING_LOG_HEADER}")?;
    for row in &rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let wants_checkpoint = args.policies.iter().any(|p| p == "checkpoint");
    let registry = build_registry(args.checkpoint.as_deref(), wants_checkpoint)?;
    let spec = SweepSpec {
        policies: args.policies,
        n_uavs: args.n_uavs,
        n_targets: args.n_targets,
        episodes: args.episodes.unwrap_or(cfg.eval.episodes),
        base_seed: args.seed.unwrap_or(cfg.eval.base_seed),
        workers: args.workers.unwrap_or(cfg.eval.workers),
    };
    let rows = sweep(&cfg, &registry, &spec, args.trace_dir.as_deref())?;
    write_metrics_csv(open_out(args.out.as_deref())?, &rows)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(args) => run_eval(args),
        Command::Train(args) => run_train(args),
        Command::Sweep(args) => run_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
