//! Per-episode mission metrics and their sweep-cell aggregation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    /// Every hotspot detected and fleet-wide known before the step limit.
    pub success: bool,
    /// Steps until completion, or the step limit when the mission timed out.
    pub mission_time: u32,
    pub total_energy_kwh: f64,
    pub total_co2_kg: f64,
    /// Mean over executed steps of the fleet-mean best-link normalized
    /// throughput; 0 for a zero-step episode.
    pub mean_norm_throughput: f64,
    /// Cumulative detected-hotspot count after each executed step.
    pub detections_timeline: Vec<u32>,
    /// Sum of team rewards over the episode.
    pub total_reward: f64,
}

pub const METRICS_CSV_HEADER: &str = "policy,n_uavs,n_targets,episodes,success_rate,\
success_se,mean_mission_time,mean_energy_kwh,mean_co2_kg,mean_norm_throughput";

/// One row of the sweep table: a (policy, fleet size, target count) cell
/// aggregated over its episodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub policy: String,
    pub n_uavs: usize,
    pub n_targets: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub success_se: f64,
    pub mean_mission_time: f64,
    pub mean_energy_kwh: f64,
    pub mean_co2_kg: f64,
    pub mean_norm_throughput: f64,
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    values.sum::<f64>() / n as f64
}

impl CellSummary {
    pub fn aggregate(
        policy: &str,
        n_uavs: usize,
        n_targets: usize,
        episodes: &[EpisodeMetrics],
    ) -> CellSummary {
        let m = episodes.len();
        let success_rate =
            mean(episodes.iter().map(|e| if e.success { 1.0 } else { 0.0 }), m);
        // Binomial standard error of the success proportion.
        let success_se = if m == 0 {
            0.0
        } else {
            (success_rate * (1.0 - success_rate) / m as f64).sqrt()
        };
        CellSummary {
            policy: policy.to_string(),
            n_uavs,
            n_targets,
            episodes: m,
            success_rate,
            success_se,
            mean_mission_time: mean(episodes.iter().map(|e| e.mission_time as f64), m),
            mean_energy_kwh: mean(episodes.iter().map(|e| e.total_energy_kwh), m),
            mean_co2_kg: mean(episodes.iter().map(|e| e.total_co2_kg), m),
            mean_norm_throughput: mean(episodes.iter().map(|e| e.mean_norm_throughput), m),
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.n_uavs,
            self.n_targets,
            self.episodes,
            self.success_rate,
            self.success_se,
            self.mean_mission_time,
            self.mean_energy_kwh,
            self.mean_co2_kg,
            self.mean_norm_throughput
        )
    }
}

/// Mean and standard error of an arbitrary per-episode statistic; handy for
/// confidence intervals on metrics the summary row does not carry an SE for.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}
