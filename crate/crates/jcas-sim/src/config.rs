//! Layered run configuration. Every section carries full defaults, so an
//! empty TOML document reproduces the reference setup; unknown keys are
//! rejected everywhere.

use crate::energy::EnergyParams;
use crate::env::reward::RewardWeights;
use crate::error::{Result, SimError};
use crate::phy::PhyParams;
use crate::policy::ppo::PpoConfig;
use crate::world::{Cell, GridSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvParams {
    pub width_cells: usize,
    pub height_cells: usize,
    pub cell_size_m: f64,
    pub depot_cells: Vec<Cell>,
    pub n_uavs: usize,
    pub n_targets: usize,
    pub t_max: u32,
    /// Simultaneous positive detections required to declare a hotspot.
    pub theta_detect: usize,
    /// Detection fires iff p > 0.5 instead of a Bernoulli draw.
    pub deterministic_detection: bool,
    /// Drop dead agents from the all-agents-informed requirement.
    pub exclude_inert_from_informed: bool,
}

impl Default for EnvParams {
    fn default() -> EnvParams {
        EnvParams {
            width_cells: 12,
            height_cells: 12,
            cell_size_m: 50.0,
            depot_cells: vec![(0, 0)],
            n_uavs: 5,
            n_targets: 3,
            t_max: 100,
            theta_detect: 3,
            deterministic_detection: false,
            exclude_inert_from_informed: false,
        }
    }
}

impl EnvParams {
    pub fn grid(&self) -> GridSpec {
        GridSpec {
            width_cells: self.width_cells,
            height_cells: self.height_cells,
            cell_size_m: self.cell_size_m,
            depot_cells: self.depot_cells.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.grid();
        grid.validate()?;
        if self.n_uavs == 0 {
            return Err(SimError::Config("n_uavs must be at least 1".into()));
        }
        if self.t_max == 0 {
            return Err(SimError::Config("t_max must be at least 1".into()));
        }
        if self.theta_detect == 0 {
            return Err(SimError::Config("theta_detect must be at least 1".into()));
        }
        let free_cells = grid.n_cells() - grid.depot_cells.len();
        if self.n_targets > free_cells {
            return Err(SimError::Config(format!(
                "{} hotspots cannot be placed on {} non-depot cells",
                self.n_targets, free_cells
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub episodes: usize,
    pub base_seed: u64,
    /// 0 lets the thread pool pick its own width.
    pub workers: usize,
}

impl Default for EvalParams {
    fn default() -> EvalParams {
        EvalParams { episodes: 100, base_seed: 0, workers: 0 }
    }
}

impl EvalParams {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(SimError::Config("episodes must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub env: EnvParams,
    pub phy: PhyParams,
    pub energy: EnergyParams,
    pub reward: RewardWeights,
    pub ppo: PpoConfig,
    pub eval: EvalParams,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.phy.validate()?;
        self.energy.validate()?;
        self.reward.validate()?;
        self.ppo.validate()?;
        self.eval.validate()?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| SimError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<SimConfig> {
        let text = std::fs::read_to_string(path)?;
        SimConfig::from_toml_str(&text)
    }
}
