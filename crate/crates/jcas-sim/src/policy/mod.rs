//! Policy trait and the by-name strategy registry.
//!
//! Every action source (scripted heuristics, the trained network) sits behind
//! the same trait and is selected at runtime by name, so the harness and CLI
//! never branch on concrete types.

pub mod gae;
pub mod mlp;
pub mod ppo;
pub mod sweep;

use crate::config::SimConfig;
use crate::env::action::ActionVector;
use crate::env::obs::ObsLayout;
use crate::error::{Result, SimError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

pub trait Policy: Send {
    fn name(&self) -> &str;
    /// Called once per episode before the first `act`.
    fn reset(&mut self, n_agents: usize);
    /// One action per agent observation. Implementations that are
    /// deterministic simply ignore the rng.
    fn act(&mut self, observations: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<ActionVector>;
}

/// Uniform actions over [-1,1]^2.
pub struct RandomPolicy;

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn reset(&mut self, _n_agents: usize) {}

    fn act(&mut self, observations: &[Vec<f64>], rng: &mut ChaCha8Rng) -> Vec<ActionVector> {
        observations
            .iter()
            .map(|_| {
                ActionVector::new(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0))
            })
            .collect()
    }
}

type PolicyFactory = Box<dyn Fn(&SimConfig) -> Result<Box<dyn Policy>> + Send + Sync>;

pub struct PolicyRegistry {
    factories: BTreeMap<String, PolicyFactory>,
}

impl PolicyRegistry {
    /// Registry with the built-in strategies: `random`, `constant-pilot`,
    /// `adaptive-pilot`.
    pub fn builtin() -> PolicyRegistry {
        let mut r = PolicyRegistry { factories: BTreeMap::new() };
        r.register("random", |_cfg| Ok(Box::new(RandomPolicy)));
        r.register("constant-pilot", |cfg| {
            Ok(Box::new(sweep::SweepPolicy::from_config(cfg, sweep::PilotMode::Constant)))
        });
        r.register("adaptive-pilot", |cfg| {
            Ok(Box::new(sweep::SweepPolicy::from_config(cfg, sweep::PilotMode::Adaptive)))
        });
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&SimConfig) -> Result<Box<dyn Policy>> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    /// Loads a trained checkpoint and registers it under `name`. The network
    /// dimensions are checked against the config at creation time.
    pub fn register_checkpoint(&mut self, name: &str, path: &Path) -> Result<()> {
        let loaded = Arc::new(ppo::Checkpoint::load(path)?);
        let reg_name = name.to_string();
        self.register(name, move |cfg| {
            let expect = ObsLayout::new(cfg.env.n_targets).dim();
            if loaded.obs_dim != expect {
                return Err(SimError::Config(format!(
                    "checkpoint expects observation dimension {}, config produces {}",
                    loaded.obs_dim, expect
                )));
            }
            Ok(Box::new(ppo::CheckpointPolicy::new(reg_name.clone(), Arc::clone(&loaded))))
        });
        Ok(())
    }

    pub fn create(&self, name: &str, cfg: &SimConfig) -> Result<Box<dyn Policy>> {
        match self.factories.get(name) {
            Some(f) => f(cfg),
            None => Err(SimError::Config(format!(
                "unknown policy {name:?}; registered: {}",
                self.names().join(", ")
            ))),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }
}
