//! Clipped-surrogate policy optimization with hand-written gradients.
//!
//! The actor is a shared diagonal-Gaussian network driven per agent on local
//! observations. Training is fully deterministic for a given seed: every
//! iteration derives its own seed, builds fresh environments from it, and
//! draws exploration and shuffle noise from per-purpose streams, so resuming
//! from a checkpoint continues the exact run that produced it.

use std::fs;
use std::io::Write as IoWrite;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::env::action::ActionVector;
use crate::env::obs::ObsLayout;
use crate::env::JcasEnv;
use crate::error::{Result, SimError};
use crate::policy::gae::compute_gae;
use crate::policy::mlp::{ActorCritic, ValueNet, LOG_STD_MAX, LOG_STD_MIN};
use crate::policy::Policy;
use crate::rng::{derive_seed, stream_rng};

/// Actions are (direction, pilot) pairs.
pub const ACT_DIM: usize = 2;

const LN_2PI: f64 = 1.8378770664093453;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_ratio: f64,
    pub epochs: u32,
    pub minibatch_size: usize,
    /// Environment steps collected per iteration (each contributes one sample
    /// per agent).
    pub batch_size: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub grad_clip: f64,
    pub num_envs: usize,
    /// Train a separate value network on the concatenated fleet observation
    /// instead of the actor's own value head.
    pub centralized_critic: bool,
    pub checkpoint_every: u32,
    pub log_std_init: f64,
}

impl Default for PpoConfig {
    fn default() -> PpoConfig {
        PpoConfig {
            hidden_sizes: vec![512, 256, 128],
            learning_rate: 3e-4,
            gamma: 0.95,
            gae_lambda: 0.95,
            clip_ratio: 0.2,
            epochs: 10,
            minibatch_size: 256,
            batch_size: 4096,
            entropy_coef: 0.01,
            value_coef: 0.5,
            grad_clip: 0.5,
            num_envs: 8,
            centralized_critic: false,
            checkpoint_every: 10,
            log_std_init: -0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if self.hidden_sizes.is_empty() || self.hidden_sizes.iter().any(|&h| h == 0) {
            return bad("hidden_sizes must be non-empty with positive widths".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        for (name, v) in [("gamma", self.gamma), ("gae_lambda", self.gae_lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        if !(self.clip_ratio > 0.0 && self.clip_ratio < 1.0) {
            return bad(format!("clip_ratio must lie in (0, 1), got {}", self.clip_ratio));
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.minibatch_size == 0 {
            return bad("minibatch_size must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        for (name, v) in [("entropy_coef", self.entropy_coef), ("value_coef", self.value_coef)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.grad_clip > 0.0 && self.grad_clip.is_finite()) {
            return bad(format!("grad_clip must be positive, got {}", self.grad_clip));
        }
        if self.num_envs == 0 {
            return bad("num_envs must be at least 1".into());
        }
        if self.checkpoint_every == 0 {
            return bad("checkpoint_every must be at least 1".into());
        }
        if !self.log_std_init.is_finite() {
            return bad(format!("log_std_init must be finite, got {}", self.log_std_init));
        }
        Ok(())
    }

    fn rollout_len(&self) -> usize {
        self.batch_size.div_ceil(self.num_envs)
    }
}

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Adam {
        Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; n_params], v: vec![0.0; n_params], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(params.len(), grads.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// One agent-step of experience.
#[derive(Debug, Clone)]
pub struct RolloutSample {
    pub obs: Vec<f64>,
    pub action: [f64; ACT_DIM],
    pub logp: f64,
    pub advantage: f64,
    pub ret: f64,
    /// Row into `RolloutBatch::global_obs`; unused without the centralized
    /// critic.
    pub global_idx: usize,
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBatch {
    pub samples: Vec<RolloutSample>,
    /// Concatenated per-step fleet observations, only populated when the
    /// centralized critic is enabled.
    pub global_obs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct UpdateStats {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    pub grad_norm: f64,
}

pub struct SampleOut {
    pub action: [f64; ACT_DIM],
    pub logp: f64,
    pub value: f64,
}

/// Networks plus optimizer state; the trainer drives this, and checkpoints
/// snapshot it.
pub struct PpoCore {
    pub actor: ActorCritic,
    pub critic: Option<ValueNet>,
    adam: Adam,
    cfg: PpoConfig,
}

fn gaussian_logp(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    let mut lp = -(mean.len() as f64) * 0.5 * LN_2PI;
    for k in 0..mean.len() {
        let sigma = log_std[k].exp();
        let z = (action[k] - mean[k]) / sigma;
        lp -= 0.5 * z * z + log_std[k];
    }
    lp
}

impl PpoCore {
    pub fn init(cfg: &PpoConfig, obs_dim: usize, n_agents: usize, rng: &mut ChaCha8Rng) -> PpoCore {
        let actor = ActorCritic::new(obs_dim, ACT_DIM, &cfg.hidden_sizes, cfg.log_std_init, rng);
        let critic = cfg
            .centralized_critic
            .then(|| ValueNet::new(obs_dim * n_agents, &cfg.hidden_sizes, rng));
        let n = actor.n_params() + critic.as_ref().map_or(0, ValueNet::n_params);
        PpoCore { actor, critic, adam: Adam::new(n, cfg.learning_rate), cfg: cfg.clone() }
    }

    pub fn n_params(&self) -> usize {
        self.actor.n_params() + self.critic.as_ref().map_or(0, ValueNet::n_params)
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.actor.flatten_into(&mut out);
        if let Some(c) = &self.critic {
            c.flatten_into(&mut out);
        }
        out
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let mut cursor = 0;
        self.actor.load_from(flat, &mut cursor);
        if let Some(c) = &mut self.critic {
            c.load_from(flat, &mut cursor);
        }
        debug_assert_eq!(cursor, flat.len());
    }

    /// Draws a stochastic action via two Box-Muller transforms, one per
    /// component, in component order.
    pub fn sample(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> SampleOut {
        let cache = self.actor.forward(obs);
        let log_std = self.actor.clamped_log_std();
        let mut action = [0.0; ACT_DIM];
        for k in 0..ACT_DIM {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let z = (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            action[k] = cache.mean[k] + log_std[k].exp() * z;
        }
        let logp = gaussian_logp(&cache.mean, &log_std, &action);
        SampleOut { action, logp, value: cache.value }
    }

    pub fn mean_action(&self, obs: &[f64]) -> [f64; ACT_DIM] {
        let cache = self.actor.forward(obs);
        [cache.mean[0], cache.mean[1]]
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.actor.forward(obs).value
    }

    pub fn central_value(&self, global_obs: &[f64]) -> f64 {
        self.critic.as_ref().expect("centralized critic enabled").forward(global_obs).value
    }

    pub fn entropy(&self) -> f64 {
        // Diagonal Gaussian entropy is state independent.
        self.actor
            .clamped_log_std()
            .iter()
            .map(|s| s + 0.5 * (LN_2PI + 1.0))
            .sum()
    }

    /// Runs the clipped-surrogate update over the batch. Gradients are exact
    /// for the sampled minibatch losses; any non-finite loss or gradient
    /// aborts before parameters change.
    pub fn update(&mut self, batch: &RolloutBatch, rng: &mut ChaCha8Rng) -> Result<UpdateStats> {
        let n = batch.samples.len();
        if n == 0 {
            return Err(SimError::Training("empty rollout batch".into()));
        }
        let mean_adv = batch.samples.iter().map(|s| s.advantage).sum::<f64>() / n as f64;
        let var_adv = batch
            .samples
            .iter()
            .map(|s| (s.advantage - mean_adv).powi(2))
            .sum::<f64>()
            / n as f64;
        let adv_scale = var_adv.sqrt() + 1e-8;
        let norm_adv: Vec<f64> =
            batch.samples.iter().map(|s| (s.advantage - mean_adv) / adv_scale).collect();

        let eps = self.cfg.clip_ratio;
        let n_params = self.n_params();
        let actor_params = self.actor.n_params();
        let log_std_off = actor_params - ACT_DIM;
        // Gradient through the clamp is blocked outside the band.
        let std_gate: Vec<bool> = self
            .actor
            .log_std
            .iter()
            .map(|&s| (LOG_STD_MIN..=LOG_STD_MAX).contains(&s))
            .collect();

        let mut indices: Vec<usize> = (0..n).collect();
        let mut grads = vec![0.0; n_params];
        let mut sum_policy_loss = 0.0;
        let mut sum_value_loss = 0.0;
        let mut sum_grad_norm = 0.0;
        let mut n_passes = 0u64;
        let mut sum_kl = 0.0;
        let mut clip_count = 0u64;
        let mut samples_seen = 0u64;

        for _ in 0..self.cfg.epochs {
            indices.shuffle(rng);
            for chunk in indices.chunks(self.cfg.minibatch_size) {
                let m = chunk.len() as f64;
                grads.fill(0.0);
                let mut pass_policy = 0.0;
                let mut pass_value = 0.0;
                let log_std = self.actor.clamped_log_std();
                for &i in chunk {
                    let s = &batch.samples[i];
                    let cache = self.actor.forward(&s.obs);
                    let new_logp = gaussian_logp(&cache.mean, &log_std, &s.action);
                    let ratio = (new_logp - s.logp).exp();
                    let adv = norm_adv[i];
                    let unclipped = ratio * adv;
                    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
                    pass_policy += -unclipped.min(clipped) / m;
                    let clipped_out =
                        (adv >= 0.0 && ratio > 1.0 + eps) || (adv < 0.0 && ratio < 1.0 - eps);
                    if clipped_out {
                        clip_count += 1;
                    }
                    let d_logp = if clipped_out { 0.0 } else { -adv * ratio / m };
                    let mut d_mean = [0.0; ACT_DIM];
                    let mut d_log_std = [0.0; ACT_DIM];
                    for k in 0..ACT_DIM {
                        let sigma = log_std[k].exp();
                        let delta = s.action[k] - cache.mean[k];
                        d_mean[k] = d_logp * delta / (sigma * sigma);
                        if std_gate[k] {
                            d_log_std[k] = d_logp * (delta * delta / (sigma * sigma) - 1.0);
                        }
                    }
                    if let Some(critic) = &self.critic {
                        let vcache = critic.forward(&batch.global_obs[s.global_idx]);
                        pass_value += 0.5 * (vcache.value - s.ret).powi(2) / m;
                        let d_v = self.cfg.value_coef * (vcache.value - s.ret) / m;
                        critic.backward(&vcache, d_v, &mut grads, actor_params);
                        self.actor.backward(&cache, &d_mean, 0.0, &d_log_std, &mut grads);
                    } else {
                        pass_value += 0.5 * (cache.value - s.ret).powi(2) / m;
                        let d_v = self.cfg.value_coef * (cache.value - s.ret) / m;
                        self.actor.backward(&cache, &d_mean, d_v, &d_log_std, &mut grads);
                    }
                    sum_kl += s.logp - new_logp;
                    samples_seen += 1;
                }
                // Entropy bonus: state independent, so its gradient lands once
                // per minibatch rather than per sample.
                for k in 0..ACT_DIM {
                    if std_gate[k] {
                        grads[log_std_off + k] -= self.cfg.entropy_coef;
                    }
                }

                if !pass_policy.is_finite() || !pass_value.is_finite() {
                    return Err(SimError::Training(format!(
                        "non-finite loss (policy {pass_policy}, value {pass_value})"
                    )));
                }
                let sq_norm = grads.iter().map(|g| g * g).sum::<f64>();
                if !sq_norm.is_finite() {
                    return Err(SimError::Training("non-finite gradient".into()));
                }
                let grad_norm = sq_norm.sqrt();
                if grad_norm > self.cfg.grad_clip {
                    let scale = self.cfg.grad_clip / grad_norm;
                    for g in &mut grads {
                        *g *= scale;
                    }
                }
                let mut params = self.flatten();
                self.adam.step(&mut params, &grads);
                self.load_flat(&params);

                sum_policy_loss += pass_policy;
                sum_value_loss += pass_value;
                sum_grad_norm += grad_norm;
                n_passes += 1;
            }
        }

        Ok(UpdateStats {
            policy_loss: sum_policy_loss / n_passes as f64,
            value_loss: sum_value_loss / n_passes as f64,
            entropy: self.entropy(),
            kl: sum_kl / samples_seen as f64,
            clip_fraction: clip_count as f64 / samples_seen as f64,
            grad_norm: sum_grad_norm / n_passes as f64,
        })
    }
}

#[derive(Debug, Clone)]
pub struct IterationStats {
    /// Completed iterations so far (1-based after the first).
    pub iteration: u32,
    pub env_steps: u64,
    pub episodes: u32,
    pub mean_return: f64,
    pub update: UpdateStats,
}

impl IterationStats {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.env_steps,
            self.episodes,
            self.mean_return,
            self.update.policy_loss,
            self.update.value_loss,
            self.update.entropy,
            self.update.kl,
            self.update.clip_fraction,
            self.update.grad_norm
        )
    }
}

pub const TRAINING_LOG_HEADER: &str =
    "iteration,env_steps,episodes,mean_return,policy_loss,value_loss,entropy,kl,clip_fraction,grad_norm";

/// One environment slot's finished contribution to an iteration.
struct SlotOut {
    /// Step-major, agent-minor; `global_idx` is slot-local until merged.
    samples: Vec<RolloutSample>,
    global_obs: Vec<Vec<f64>>,
    episode_returns: Vec<f64>,
}

pub struct Trainer {
    cfg: SimConfig,
    core: PpoCore,
    iteration: u32,
    total_env_steps: u64,
    train_seed: u64,
    last_mean_return: f64,
}

impl Trainer {
    pub fn new(cfg: &SimConfig, seed: u64) -> Result<Trainer> {
        cfg.validate()?;
        let obs_dim = ObsLayout::new(cfg.env.n_targets).dim();
        let core = PpoCore::init(&cfg.ppo, obs_dim, cfg.env.n_uavs, &mut stream_rng(seed, 0));
        Ok(Trainer {
            cfg: cfg.clone(),
            core,
            iteration: 0,
            total_env_steps: 0,
            train_seed: seed,
            last_mean_return: 0.0,
        })
    }

    /// Restores a trainer mid-run; the checkpoint's own seed governs the
    /// continuation so the run is identical to one that never stopped.
    pub fn from_checkpoint(cfg: &SimConfig, ckpt: &Checkpoint) -> Result<Trainer> {
        cfg.validate()?;
        let obs_dim = ObsLayout::new(cfg.env.n_targets).dim();
        ckpt.check_shape(obs_dim, cfg.env.n_uavs, &cfg.ppo)?;
        let mut core =
            PpoCore::init(&cfg.ppo, obs_dim, cfg.env.n_uavs, &mut stream_rng(ckpt.train_seed, 0));
        core.load_flat(&ckpt.params);
        core.adam.m.copy_from_slice(&ckpt.adam_m);
        core.adam.v.copy_from_slice(&ckpt.adam_v);
        core.adam.t = ckpt.adam_t;
        Ok(Trainer {
            cfg: cfg.clone(),
            core,
            iteration: ckpt.iteration,
            total_env_steps: ckpt.total_env_steps,
            train_seed: ckpt.train_seed,
            last_mean_return: ckpt.last_mean_return,
        })
    }

    pub fn iteration(&self) -> u32 {
        self.iteration
    }

    pub fn core(&self) -> &PpoCore {
        &self.core
    }

    fn concat_obs(obs: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(obs.iter().map(Vec::len).sum());
        for o in obs {
            out.extend_from_slice(o);
        }
        out
    }

    /// Rolls one environment slot forward for the full iteration, resetting
    /// whenever an episode ends. Each slot owns an independent noise stream,
    /// so slots can run in parallel without perturbing each other.
    fn run_slot(&self, iter_seed: u64, slot: usize) -> Result<SlotOut> {
        let ppo = &self.cfg.ppo;
        let n_agents = self.cfg.env.n_uavs;
        let rollout_len = ppo.rollout_len();
        let centralized = self.core.critic.is_some();
        let mut sample_rng = stream_rng(iter_seed, 16 + slot as u64);

        let mut env = JcasEnv::new(&self.cfg, derive_seed(iter_seed, 1000 + slot as u64))?;
        let mut cur_obs = env.observations();
        let mut reset_count = 0u64;
        let mut running_return = 0.0;
        let mut episode_returns = Vec::new();

        let mut obs_log: Vec<Vec<Vec<f64>>> = Vec::with_capacity(rollout_len);
        let mut action_log: Vec<Vec<[f64; ACT_DIM]>> = Vec::with_capacity(rollout_len);
        let mut logp_log: Vec<Vec<f64>> = Vec::with_capacity(rollout_len);
        // Per agent normally, one entry per step with the centralized critic.
        let mut value_log: Vec<Vec<f64>> = Vec::with_capacity(rollout_len);
        let mut rewards = Vec::with_capacity(rollout_len);
        let mut dones = Vec::with_capacity(rollout_len);
        let mut global_obs: Vec<Vec<f64>> = Vec::new();
        let mut global_rows = Vec::with_capacity(rollout_len);

        for _ in 0..rollout_len {
            let mut actions = Vec::with_capacity(n_agents);
            let mut raw = Vec::with_capacity(n_agents);
            let mut logps = Vec::with_capacity(n_agents);
            let mut values = Vec::with_capacity(n_agents);
            for agent_obs in &cur_obs {
                let out = self.core.sample(agent_obs, &mut sample_rng);
                actions.push(ActionVector { u_dir: out.action[0], u_pilot: out.action[1] });
                raw.push(out.action);
                logps.push(out.logp);
                values.push(out.value);
            }
            if centralized {
                global_rows.push(global_obs.len());
                global_obs.push(Self::concat_obs(&cur_obs));
                value_log.push(vec![self.core.central_value(global_obs.last().unwrap())]);
            } else {
                value_log.push(values);
            }
            obs_log.push(cur_obs.clone());
            action_log.push(raw);
            logp_log.push(logps);

            let outcome = env.step(&actions)?;
            running_return += outcome.team_reward;
            let ended = outcome.done || outcome.truncated;
            rewards.push(outcome.team_reward);
            dones.push(ended);
            if ended {
                episode_returns.push(running_return);
                running_return = 0.0;
                let seed = derive_seed(iter_seed, 2000 + slot as u64 * 10_000 + reset_count);
                reset_count += 1;
                env = JcasEnv::new(&self.cfg, seed)?;
                cur_obs = env.observations();
            } else {
                cur_obs = outcome.observations;
            }
        }

        let steps = rewards.len();
        let ended_at_cut = *dones.last().unwrap();
        let mut samples = Vec::with_capacity(steps * n_agents);
        if centralized {
            let values: Vec<f64> = value_log.iter().map(|v| v[0]).collect();
            let bootstrap = if ended_at_cut {
                0.0
            } else {
                self.core.central_value(&Self::concat_obs(&cur_obs))
            };
            let (adv, ret) =
                compute_gae(&rewards, &values, &dones, bootstrap, ppo.gamma, ppo.gae_lambda);
            for t in 0..steps {
                for a in 0..n_agents {
                    samples.push(RolloutSample {
                        obs: obs_log[t][a].clone(),
                        action: action_log[t][a],
                        logp: logp_log[t][a],
                        advantage: adv[t],
                        ret: ret[t],
                        global_idx: global_rows[t],
                    });
                }
            }
        } else {
            let per_agent: Vec<(Vec<f64>, Vec<f64>)> = (0..n_agents)
                .map(|a| {
                    let values: Vec<f64> = value_log.iter().map(|v| v[a]).collect();
                    let bootstrap =
                        if ended_at_cut { 0.0 } else { self.core.value(&cur_obs[a]) };
                    compute_gae(&rewards, &values, &dones, bootstrap, ppo.gamma, ppo.gae_lambda)
                })
                .collect();
            for t in 0..steps {
                for (a, (adv, ret)) in per_agent.iter().enumerate() {
                    samples.push(RolloutSample {
                        obs: obs_log[t][a].clone(),
                        action: action_log[t][a],
                        logp: logp_log[t][a],
                        advantage: adv[t],
                        ret: ret[t],
                        global_idx: 0,
                    });
                }
            }
        }

        Ok(SlotOut { samples, global_obs, episode_returns })
    }

    fn collect_rollout(&self, iter_seed: u64) -> Result<(RolloutBatch, u32, f64)> {
        let outs: Vec<SlotOut> = (0..self.cfg.ppo.num_envs)
            .into_par_iter()
            .map(|slot| self.run_slot(iter_seed, slot))
            .collect::<Result<_>>()?;

        // Merge in slot order so parallelism never changes the batch.
        let mut batch = RolloutBatch::default();
        let mut episode_returns = Vec::new();
        for out in outs {
            let offset = batch.global_obs.len();
            for mut s in out.samples {
                s.global_idx += offset;
                batch.samples.push(s);
            }
            batch.global_obs.extend(out.global_obs);
            episode_returns.extend(out.episode_returns);
        }

        let episodes = episode_returns.len() as u32;
        let mean_return = if episode_returns.is_empty() {
            0.0
        } else {
            episode_returns.iter().sum::<f64>() / episode_returns.len() as f64
        };
        Ok((batch, episodes, mean_return))
    }

    pub fn run_iteration(&mut self) -> Result<IterationStats> {
        let iter_seed = derive_seed(self.train_seed, self.iteration as u64);
        let (batch, episodes, mean_return) = self.collect_rollout(iter_seed)?;
        let update = self.core.update(&batch, &mut stream_rng(iter_seed, 2))?;
        self.iteration += 1;
        self.total_env_steps += (self.cfg.ppo.rollout_len() * self.cfg.ppo.num_envs) as u64;
        self.last_mean_return = mean_return;
        Ok(IterationStats {
            iteration: self.iteration,
            env_steps: self.total_env_steps,
            episodes,
            mean_return,
            update,
        })
    }

    /// Runs `n_iters` iterations. With a checkpoint directory, appends to
    /// `training_log.csv` and writes periodic checkpoints plus `latest.json`;
    /// on a training error the last written checkpoint is left untouched.
    pub fn train(&mut self, n_iters: u32, checkpoint_dir: Option<&Path>) -> Result<Vec<IterationStats>> {
        let mut log = match checkpoint_dir {
            Some(dir) => {
                fs::create_dir_all(dir)?;
                let path = dir.join("training_log.csv");
                let fresh = fs::metadata(&path).map(|m| m.len() == 0).unwrap_or(true);
                let mut f = fs::OpenOptions::new().create(true).append(true).open(&path)?;
                if fresh {
                    writeln!(f, "{TRAINING_LOG_HEADER}")?;
                }
                Some(f)
            }
            None => None,
        };
        let mut rows = Vec::with_capacity(n_iters as usize);
        for k in 0..n_iters {
            let stats = self.run_iteration()?;
            if let Some(f) = &mut log {
                writeln!(f, "{}", stats.csv_row())?;
                f.flush()?;
            }
            if let Some(dir) = checkpoint_dir {
                let last = k + 1 == n_iters;
                if stats.iteration % self.cfg.ppo.checkpoint_every == 0 || last {
                    let ckpt = self.checkpoint();
                    ckpt.save(&dir.join(format!("checkpoint_{:04}.json", stats.iteration)))?;
                    ckpt.save(&dir.join("latest.json"))?;
                }
            }
            rows.push(stats);
        }
        Ok(rows)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            iteration: self.iteration,
            total_env_steps: self.total_env_steps,
            train_seed: self.train_seed,
            obs_dim: self.core.actor.obs_dim(),
            act_dim: ACT_DIM,
            hidden_sizes: self.cfg.ppo.hidden_sizes.clone(),
            n_agents: self.cfg.env.n_uavs,
            centralized_critic: self.core.critic.is_some(),
            last_mean_return: self.last_mean_return,
            params: self.core.flatten(),
            adam_m: self.core.adam.m.clone(),
            adam_v: self.core.adam.v.clone(),
            adam_t: self.core.adam.t,
        }
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub iteration: u32,
    pub total_env_steps: u64,
    pub train_seed: u64,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub n_agents: usize,
    pub centralized_critic: bool,
    pub last_mean_return: f64,
    pub params: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_t: u64,
}

impl Checkpoint {
    fn expected_params(&self) -> usize {
        let mut n = 0;
        let mut prev = self.obs_dim;
        for &h in &self.hidden_sizes {
            n += prev * h + h;
            prev = h;
        }
        n += prev * self.act_dim + self.act_dim; // mean head
        n += prev + 1; // value head
        n += self.act_dim; // log_std
        if self.centralized_critic {
            let mut prev = self.obs_dim * self.n_agents;
            for &h in &self.hidden_sizes {
                n += prev * h + h;
                prev = h;
            }
            n += prev + 1;
        }
        n
    }

    fn check_shape(&self, obs_dim: usize, n_agents: usize, ppo: &PpoConfig) -> Result<()> {
        if self.obs_dim != obs_dim
            || self.n_agents != n_agents
            || self.hidden_sizes != ppo.hidden_sizes
            || self.centralized_critic != ppo.centralized_critic
        {
            return Err(SimError::Checkpoint(format!(
                "checkpoint shape (obs {}, agents {}, hidden {:?}, central {}) does not match \
                 config (obs {obs_dim}, agents {n_agents}, hidden {:?}, central {})",
                self.obs_dim,
                self.n_agents,
                self.hidden_sizes,
                self.centralized_critic,
                ppo.hidden_sizes,
                ppo.centralized_critic
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)
            .map_err(|e| SimError::Checkpoint(format!("writing {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        let data = fs::read_to_string(path)
            .map_err(|e| SimError::Checkpoint(format!("reading {}: {e}", path.display())))?;
        let ckpt: Checkpoint = serde_json::from_str(&data)
            .map_err(|e| SimError::Checkpoint(format!("parsing {}: {e}", path.display())))?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(SimError::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        if ckpt.act_dim != ACT_DIM {
            return Err(SimError::Checkpoint(format!(
                "checkpoint action dimension {} (expected {ACT_DIM})",
                ckpt.act_dim
            )));
        }
        let expect = ckpt.expected_params();
        if ckpt.params.len() != expect
            || ckpt.adam_m.len() != expect
            || ckpt.adam_v.len() != expect
        {
            return Err(SimError::Checkpoint(format!(
                "parameter vector length {} does not match architecture ({expect})",
                ckpt.params.len()
            )));
        }
        if !ckpt.params.iter().all(|p| p.is_finite()) {
            return Err(SimError::Checkpoint("non-finite parameters".into()));
        }
        Ok(ckpt)
    }

    /// Rebuilds just the actor network (enough to act with).
    pub fn build_actor(&self) -> ActorCritic {
        let mut actor = ActorCritic::new(
            self.obs_dim,
            self.act_dim,
            &self.hidden_sizes,
            0.0,
            &mut stream_rng(0, 0),
        );
        let mut cursor = 0;
        actor.load_from(&self.params[..actor.n_params()], &mut cursor);
        actor
    }
}

/// Deterministic greedy policy over a trained actor: emits the mean action
/// and never touches the shared rng stream.
pub struct CheckpointPolicy {
    name: String,
    actor: ActorCritic,
}

impl CheckpointPolicy {
    pub fn new(name: String, ckpt: Arc<Checkpoint>) -> CheckpointPolicy {
        CheckpointPolicy { name, actor: ckpt.build_actor() }
    }
}

impl Policy for CheckpointPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn reset(&mut self, _n_agents: usize) {}

    fn act(&mut self, observations: &[Vec<f64>], _rng: &mut ChaCha8Rng) -> Vec<ActionVector> {
        observations
            .iter()
            .map(|obs| {
                let cache = self.actor.forward(obs);
                ActionVector { u_dir: cache.mean[0], u_pilot: cache.mean[1] }
            })
            .collect()
    }
}
