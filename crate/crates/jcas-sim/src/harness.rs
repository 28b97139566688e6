//! Monte Carlo evaluation: seeded episodes, parallel sweep cells, CSV rows.
//!
//! Episode i of a run always uses seed derive(base_seed, i) and a fresh
//! policy instance, and cells aggregate in episode order, so worker count and
//! scheduling never change any output byte.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::env::trace::{meta_for, TraceWriter};
use crate::env::JcasEnv;
use crate::error::{Result, SimError};
use crate::metrics::{CellSummary, EpisodeMetrics, METRICS_CSV_HEADER};
use crate::policy::{Policy, PolicyRegistry};
use crate::rng::{derive_seed, stream_rng};

/// Drives one episode to completion or the step limit, optionally streaming a
/// JSON-lines trace.
pub fn run_episode<W: Write>(
    cfg: &SimConfig,
    policy: &mut dyn Policy,
    episode_seed: u64,
    trace_out: Option<W>,
) -> Result<EpisodeMetrics> {
    let env = JcasEnv::new(cfg, episode_seed)?;
    policy.reset(cfg.env.n_uavs);
    let mut writer = match trace_out {
        Some(out) => {
            Some(TraceWriter::new(out, &meta_for(policy.name(), episode_seed, env.world()))?)
        }
        None => None,
    };

    // Without hotspots there is nothing to detect or inform: the mission is
    // vacuously complete before the first step.
    if cfg.env.n_targets == 0 {
        if let Some(w) = writer {
            w.finish()?;
        }
        return Ok(EpisodeMetrics {
            success: true,
            mission_time: 0,
            total_energy_kwh: 0.0,
            total_co2_kg: 0.0,
            mean_norm_throughput: 0.0,
            detections_timeline: Vec::new(),
            total_reward: 0.0,
        });
    }

    let mut env = env;
    let mut policy_rng = stream_rng(episode_seed, 3);
    let mut obs = env.observations();
    let mut total_energy = 0.0;
    let mut total_co2 = 0.0;
    let mut total_reward = 0.0;
    let mut throughput_sum = 0.0;
    let mut steps = 0u32;
    let mut detected_so_far = 0u32;
    let mut timeline = Vec::new();

    let (success, mission_time) = loop {
        let actions = policy.act(&obs, &mut policy_rng);
        let outcome = env.step(&actions).map_err(|e| {
            SimError::Protocol(format!("episode seed {episode_seed}, step {}: {e}", steps + 1))
        })?;
        steps += 1;
        let tr = &outcome.transition;
        total_energy += tr.energies_kwh.iter().sum::<f64>();
        total_co2 += tr.co2_kg;
        total_reward += outcome.team_reward;
        throughput_sum += tr.fleet_mean_throughput;
        detected_so_far += tr.newly_detected.len() as u32;
        timeline.push(detected_so_far);
        if let Some(w) = writer.as_mut() {
            w.write_step(env.world(), &actions, tr)?;
        }
        if outcome.done {
            break (true, env.world().t);
        }
        if outcome.truncated {
            break (false, cfg.env.t_max);
        }
        obs = outcome.observations;
    };
    if let Some(w) = writer {
        w.finish()?;
    }

    Ok(EpisodeMetrics {
        success,
        mission_time,
        total_energy_kwh: total_energy,
        total_co2_kg: total_co2,
        mean_norm_throughput: throughput_sum / steps as f64,
        detections_timeline: timeline,
        total_reward,
    })
}

#[derive(Debug)]
pub struct EvalOutcome {
    pub summary: CellSummary,
    pub episodes: Vec<EpisodeMetrics>,
}

/// Evaluates one policy over `episodes` seeded episodes. `workers` of 0 uses
/// the global thread pool; any other value runs inside a dedicated pool of
/// that size.
pub fn evaluate(
    cfg: &SimConfig,
    registry: &PolicyRegistry,
    policy_name: &str,
    episodes: usize,
    base_seed: u64,
    workers: usize,
    trace_dir: Option<&Path>,
) -> Result<EvalOutcome> {
    cfg.validate()?;
    // Surface unknown policies and dimension mismatches before spawning work.
    registry.create(policy_name, cfg)?;
    if let Some(dir) = trace_dir {
        fs::create_dir_all(dir)?;
    }

    let run = || -> Result<Vec<EpisodeMetrics>> {
        (0..episodes)
            .into_par_iter()
            .map(|i| {
                let mut policy = registry.create(policy_name, cfg)?;
                let seed = derive_seed(base_seed, i as u64);
                match trace_dir {
                    Some(dir) => {
                        let file = fs::File::create(dir.join(format!("trace_ep{i:04}.jsonl")))?;
                        run_episode(cfg, policy.as_mut(), seed, Some(BufWriter::new(file)))
                    }
                    None => run_episode::<fs::File>(cfg, policy.as_mut(), seed, None),
                }
            })
            .collect()
    };
    let metrics = if workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| SimError::Config(format!("worker pool: {e}")))?
            .install(run)
    } else {
        run()
    }?;

    let summary =
        CellSummary::aggregate(policy_name, cfg.env.n_uavs, cfg.env.n_targets, &metrics);
    Ok(EvalOutcome { summary, episodes: metrics })
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub policies: Vec<String>,
    pub n_uavs: Vec<usize>,
    pub n_targets: Vec<usize>,
    pub episodes: usize,
    pub base_seed: u64,
    pub workers: usize,
}

/// Runs the cross product of policies, fleet sizes, and target counts. Every
/// cell reuses the same base seed, so cells are paired sample-for-sample and
/// directly comparable.
pub fn sweep(
    cfg_base: &SimConfig,
    registry: &PolicyRegistry,
    spec: &SweepSpec,
    trace_root: Option<&Path>,
) -> Result<Vec<CellSummary>> {
    let mut rows = Vec::with_capacity(
        spec.policies.len() * spec.n_uavs.len() * spec.n_targets.len(),
    );
    for policy in &spec.policies {
        for &n_uavs in &spec.n_uavs {
            for &n_targets in &spec.n_targets {
                let mut cfg = cfg_base.clone();
                cfg.env.n_uavs = n_uavs;
                cfg.env.n_targets = n_targets;
                let cell_dir: Option<PathBuf> = trace_root
                    .map(|root| root.join(format!("{policy}_n{n_uavs}_t{n_targets}")));
                let out = evaluate(
                    &cfg,
                    registry,
                    policy,
                    spec.episodes,
                    spec.base_seed,
                    spec.workers,
                    cell_dir.as_deref(),
                )?;
                rows.push(out.summary);
            }
        }
    }
    Ok(rows)
}

pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[CellSummary]) -> Result<()> {
    writeln!(out, "{METRICS_CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_row())?;
    }
    out.flush()?;
    Ok(())
}
