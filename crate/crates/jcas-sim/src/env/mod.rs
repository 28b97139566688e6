//! The mission environment: a grid Dec-POMDP where a UAV fleet searches for
//! hotspots, shares detections over the comm graph, and pays for energy and
//! grid carbon.
//!
//! Step phases run in a fixed order: decode actions, apply return-to-base
//! overrides, move simultaneously, settle energy and charging, run the
//! detection round, rebuild the comm graph, propagate knowledge, update
//! informed/completion state, compute the reward, build observations. The
//! carbon price seen in an observation is the one that will bill the next
//! step's charging.

pub mod action;
pub mod obs;
pub mod reward;
pub mod trace;

use crate::config::{EnvParams, SimConfig};
use crate::energy::{
    carbon_emission_kg, sample_carbon_intensity, step_energy_kwh, update_battery, EnergyParams,
};
use crate::error::{Result, SimError};
use crate::knowledge::{
    build_comm_graph, detection_round, informed_status, propagate, CommGraph, KnowledgeMatrix,
};
use crate::phy::Phy;
use crate::rng::{derive_seed, stream_rng};
use crate::world::{
    apply_move, manhattan_cells, spawn_mission, Cell, Direction, WorldState,
};
use action::{decode_action, ActionVector};
use obs::{build_observation, ObsContext, ObsLayout};
use rand_chacha::ChaCha8Rng;
use reward::{RewardTerms, RewardWeights};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodedAction {
    pub direction: Direction,
    pub pilot_density: f64,
}

/// Everything one step produced, itemized for traces and analysis. The team
/// reward always equals `terms.total()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Directions and pilot densities decoded from the raw actions, before
    /// any override.
    pub decoded: Vec<DecodedAction>,
    /// Directions actually executed after return-to-base and inert overrides.
    pub commands: Vec<Direction>,
    pub energies_kwh: Vec<f64>,
    pub newly_detected: Vec<usize>,
    pub newly_informed: Vec<usize>,
    /// (agent, hotspot) positive local detections this step.
    pub hits: Vec<(usize, usize)>,
    /// Fleet-mean best-link normalized throughput, before reward scaling.
    pub fleet_mean_throughput: f64,
    /// Grid energy drawn for charging this step and its CO2 at the step's
    /// carbon price.
    pub grid_kwh: f64,
    pub co2_kg: f64,
    pub terms: RewardTerms,
    pub team_reward: f64,
    pub done: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub observations: Vec<Vec<f64>>,
    pub team_reward: f64,
    pub done: bool,
    pub truncated: bool,
    pub transition: Transition,
}

pub struct JcasEnv {
    env: EnvParams,
    phy: Phy,
    energy: EnergyParams,
    weights: RewardWeights,
    world: WorldState,
    knowledge: KnowledgeMatrix,
    graph: CommGraph,
    visited: Vec<bool>,
    carbon_intensity: f64,
    rng: ChaCha8Rng,
    done: bool,
    truncated: bool,
}

impl JcasEnv {
    pub fn new(cfg: &SimConfig, seed: u64) -> Result<JcasEnv> {
        cfg.validate()?;
        let phy = Phy::new(cfg.phy.clone())?;
        let world = spawn_mission(
            derive_seed(seed, 1),
            &cfg.env.grid(),
            cfg.env.n_uavs,
            cfg.env.n_targets,
            cfg.energy.b_max_kwh,
            cfg.phy.pilot_min,
        )?;
        Self::from_parts(cfg, phy, world, seed)
    }

    /// Builds the environment around an explicit world, for scripted
    /// scenarios. Fleet and hotspot counts must match the config.
    pub fn with_world(cfg: &SimConfig, world: WorldState, seed: u64) -> Result<JcasEnv> {
        cfg.validate()?;
        if world.uavs.len() != cfg.env.n_uavs || world.hotspots.len() != cfg.env.n_targets {
            return Err(SimError::Config(format!(
                "world has {} UAVs / {} hotspots but the config says {} / {}",
                world.uavs.len(),
                world.hotspots.len(),
                cfg.env.n_uavs,
                cfg.env.n_targets
            )));
        }
        world.grid.validate()?;
        let phy = Phy::new(cfg.phy.clone())?;
        Self::from_parts(cfg, phy, world, seed)
    }

    fn from_parts(cfg: &SimConfig, phy: Phy, world: WorldState, seed: u64) -> Result<JcasEnv> {
        let mut rng = stream_rng(seed, 2);
        let carbon_intensity = sample_carbon_intensity(&mut rng, &cfg.energy);
        let active: Vec<bool> = world.uavs.iter().map(|u| !u.inert).collect();
        let cells: Vec<Cell> = world.uavs.iter().map(|u| u.cell).collect();
        let graph = build_comm_graph(&cells, &active, world.grid.cell_size_m, &phy)?;
        let mut visited = vec![false; world.grid.n_cells()];
        for u in &world.uavs {
            visited[world.grid.cell_index(u.cell)] = true;
        }
        let knowledge = KnowledgeMatrix::new(world.uavs.len(), world.hotspots.len());
        Ok(JcasEnv {
            env: cfg.env.clone(),
            phy,
            energy: cfg.energy.clone(),
            weights: cfg.reward,
            world,
            knowledge,
            graph,
            visited,
            carbon_intensity,
            rng,
            done: false,
            truncated: false,
        })
    }

    /// Starts a fresh episode from the seed and returns the initial
    /// observations.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<Vec<f64>>> {
        let world = spawn_mission(
            derive_seed(seed, 1),
            &self.env.grid(),
            self.env.n_uavs,
            self.env.n_targets,
            self.energy.b_max_kwh,
            self.phy.params.pilot_min,
        )?;
        self.rng = stream_rng(seed, 2);
        self.carbon_intensity = sample_carbon_intensity(&mut self.rng, &self.energy);
        let cells: Vec<Cell> = world.uavs.iter().map(|u| u.cell).collect();
        let active = vec![true; cells.len()];
        self.graph = build_comm_graph(&cells, &active, world.grid.cell_size_m, &self.phy)?;
        self.visited = vec![false; world.grid.n_cells()];
        for u in &world.uavs {
            self.visited[world.grid.cell_index(u.cell)] = true;
        }
        self.knowledge = KnowledgeMatrix::new(world.uavs.len(), world.hotspots.len());
        self.world = world;
        self.done = false;
        self.truncated = false;
        Ok(self.observations())
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn graph(&self) -> &CommGraph {
        &self.graph
    }

    pub fn knowledge(&self) -> &KnowledgeMatrix {
        &self.knowledge
    }

    pub fn carbon_intensity(&self) -> f64 {
        self.carbon_intensity
    }

    pub fn is_over(&self) -> bool {
        self.done || self.truncated
    }

    pub fn layout(&self) -> ObsLayout {
        ObsLayout::new(self.env.n_targets)
    }

    pub fn obs_dim(&self) -> usize {
        self.layout().dim()
    }

    pub fn n_agents(&self) -> usize {
        self.env.n_uavs
    }

    pub fn detected_flags(&self) -> Vec<bool> {
        self.world.hotspots.iter().map(|h| h.detected_at.is_some()).collect()
    }

    pub fn informed_flags(&self) -> Vec<bool> {
        self.world.hotspots.iter().map(|h| h.informed_at.is_some()).collect()
    }

    pub fn observations(&self) -> Vec<Vec<f64>> {
        let detected = self.detected_flags();
        let informed = self.informed_flags();
        let ctx = ObsContext {
            world: &self.world,
            graph: &self.graph,
            knowledge: &self.knowledge,
            detected: &detected,
            informed: &informed,
            carbon_intensity: self.carbon_intensity,
            phy: &self.phy,
            battery_capacity_kwh: self.energy.b_max_kwh,
            carbon_range: (
                self.energy.carbon_intensity_min_kg_per_kwh,
                self.energy.carbon_intensity_max_kg_per_kwh,
            ),
            t_max: self.env.t_max,
        };
        (0..self.world.uavs.len()).map(|i| build_observation(&ctx, i)).collect()
    }

    /// Potential on mean normalized distance to the nearest undetected
    /// hotspot; zero once everything is detected.
    fn distance_potential(&self) -> f64 {
        let undetected: Vec<Cell> = self
            .world
            .hotspots
            .iter()
            .filter(|h| h.detected_at.is_none())
            .map(|h| h.cell)
            .collect();
        if undetected.is_empty() {
            return 0.0;
        }
        let span = (self.world.grid.width_cells + self.world.grid.height_cells) as f64;
        let mean = self
            .world
            .uavs
            .iter()
            .map(|u| {
                undetected.iter().map(|&c| manhattan_cells(u.cell, c)).min().unwrap() as f64 / span
            })
            .sum::<f64>()
            / self.world.uavs.len() as f64;
        -self.weights.beta_distance * mean
    }

    /// Greedy Manhattan step toward the nearest depot, longer axis first and
    /// x on ties.
    fn return_step(&self, cell: Cell) -> Direction {
        let depot = self.world.grid.nearest_depot(cell);
        let dx = depot.0 as i64 - cell.0 as i64;
        let dy = depot.1 as i64 - cell.1 as i64;
        if dx == 0 && dy == 0 {
            Direction::Stay
        } else if dx.abs() >= dy.abs() {
            if dx > 0 {
                Direction::Right
            } else {
                Direction::Left
            }
        } else if dy > 0 {
            Direction::Down
        } else {
            Direction::Up
        }
    }

    fn fleet_mean_best_throughput(&self) -> f64 {
        let n = self.world.uavs.len();
        let sum: f64 = (0..n)
            .map(|i| {
                let load = 1.0 - self.world.uavs[i].pilot_density;
                self.graph
                    .neighbors(i)
                    .map(|j| self.phy.normalized_throughput(self.graph.snr_db[i][j], load))
                    .fold(0.0f64, f64::max)
            })
            .sum();
        sum / n as f64
    }

    fn knowledge_spread(&self) -> f64 {
        let n = self.world.uavs.len() as f64;
        let detected: Vec<usize> = self
            .world
            .hotspots
            .iter()
            .enumerate()
            .filter(|(_, h)| h.detected_at.is_some())
            .map(|(j, _)| j)
            .collect();
        if detected.is_empty() {
            return 0.0;
        }
        detected.iter().map(|&j| self.knowledge.count_knowing(j) as f64 / n).sum::<f64>()
            / detected.len() as f64
    }

    pub fn step(&mut self, actions: &[ActionVector]) -> Result<StepOutcome> {
        if self.is_over() {
            return Err(SimError::Protocol("step on a finished episode".into()));
        }
        let n = self.world.uavs.len();
        if actions.len() != n {
            return Err(SimError::Protocol(format!(
                "expected {n} actions, got {}",
                actions.len()
            )));
        }

        let phi_before = self.distance_potential();

        // Decode first so a malformed action leaves the episode untouched.
        let decoded: Vec<DecodedAction> = actions
            .iter()
            .map(|&a| {
                decode_action(a, self.phy.params.pilot_min, self.phy.params.pilot_max)
                    .map(|(direction, pilot_density)| DecodedAction { direction, pilot_density })
            })
            .collect::<Result<_>>()?;

        // Pilot updates and movement overrides. A returning agent flies the
        // greedy depot heading regardless of its decoded direction; an inert
        // one is frozen entirely.
        let mut commands = Vec::with_capacity(n);
        for i in 0..n {
            let resume = self.energy.resume_threshold_kwh();
            let u = &mut self.world.uavs[i];
            if u.inert {
                commands.push(Direction::Stay);
                continue;
            }
            u.pilot_density = decoded[i].pilot_density;
            if u.returning_to_base && u.battery_kwh >= resume {
                u.returning_to_base = false;
            }
            if u.battery_kwh < self.energy.rtb_threshold_kwh {
                u.returning_to_base = true;
            }
            if self.world.uavs[i].returning_to_base {
                commands.push(self.return_step(self.world.uavs[i].cell));
            } else {
                commands.push(decoded[i].direction);
            }
        }

        // Simultaneous movement, then coverage/revisit bookkeeping against
        // the pre-step visited set.
        let mut moved = vec![false; n];
        let mut revisit_count = 0usize;
        let mut fresh_cells = 0usize;
        let mut entered: Vec<Cell> = Vec::new();
        for i in 0..n {
            let old = self.world.uavs[i].cell;
            let new = apply_move(old, commands[i], &self.world.grid);
            moved[i] = new != old;
            if moved[i] {
                let idx = self.world.grid.cell_index(new);
                if self.visited[idx] {
                    revisit_count += 1;
                } else if !entered.contains(&new) {
                    // Two agents entering the same fresh cell count it once.
                    fresh_cells += 1;
                    entered.push(new);
                }
            }
            self.world.uavs[i].cell = new;
        }
        for &c in &entered {
            let idx = self.world.grid.cell_index(c);
            self.visited[idx] = true;
        }
        self.world.t += 1;

        // Energy, charging, and carbon at this step's price.
        let c_t = self.carbon_intensity;
        let mut energies_kwh = vec![0.0; n];
        let mut grid_kwh = 0.0;
        let mut co2_kg = 0.0;
        let mut n_charging = 0usize;
        for i in 0..n {
            let at_depot = self.world.grid.is_depot(self.world.uavs[i].cell);
            let u = &mut self.world.uavs[i];
            if u.inert {
                continue;
            }
            let e = step_energy_kwh(moved[i], u.pilot_density, self.phy.params.pilot_max, &self.energy);
            energies_kwh[i] = e;
            u.battery_kwh = update_battery(u.battery_kwh, e, at_depot, &self.energy);
            if at_depot {
                n_charging += 1;
                let (g, c) =
                    carbon_emission_kg(self.energy.charge_rate_kwh_per_step, c_t, &self.energy);
                grid_kwh += g;
                co2_kg += c;
            }
            if u.battery_kwh == 0.0 && !at_depot {
                u.inert = true;
                u.returning_to_base = false;
            }
        }

        // Detection round at post-move positions.
        let cells: Vec<Cell> = self.world.uavs.iter().map(|u| u.cell).collect();
        let loads: Vec<f64> =
            self.world.uavs.iter().map(|u| 1.0 - u.pilot_density).collect();
        let can_sense: Vec<bool> = self.world.uavs.iter().map(|u| !u.inert).collect();
        let hotspot_cells: Vec<Cell> = self.world.hotspots.iter().map(|h| h.cell).collect();
        let already_detected = self.detected_flags();
        let report = detection_round(
            &cells,
            &loads,
            &can_sense,
            &hotspot_cells,
            &already_detected,
            &mut self.knowledge,
            self.world.grid.cell_size_m,
            &self.phy,
            self.env.theta_detect,
            self.env.deterministic_detection,
            &mut self.rng,
        )?;
        for &j in &report.newly_detected {
            self.world.hotspots[j].detected_at = Some(self.world.t);
        }

        // Comm graph and knowledge propagation.
        self.graph =
            build_comm_graph(&cells, &can_sense, self.world.grid.cell_size_m, &self.phy)?;
        self.knowledge = propagate(&self.knowledge, &self.graph);

        // Informed/completion bookkeeping.
        let required: Vec<bool> = if self.env.exclude_inert_from_informed {
            self.world.uavs.iter().map(|u| !u.inert).collect()
        } else {
            vec![true; n]
        };
        let detected = self.detected_flags();
        let informed_now = informed_status(&self.knowledge, &detected, &required);
        let mut newly_informed = Vec::new();
        for (j, &inf) in informed_now.iter().enumerate() {
            if inf && self.world.hotspots[j].informed_at.is_none() {
                self.world.hotspots[j].informed_at = Some(self.world.t);
                newly_informed.push(j);
            }
        }
        let done = self.env.n_targets > 0
            && self.world.hotspots.iter().all(|h| h.informed_at.is_some());
        let truncated = !done && self.world.t >= self.env.t_max;

        // Reward ledger.
        let phi_after = self.distance_potential();
        let fleet_mean_throughput = self.fleet_mean_best_throughput();
        let w = &self.weights;
        let terms = RewardTerms {
            detection: w.alpha_detect * report.newly_detected.len() as f64,
            inform: w.alpha_inform * newly_informed.len() as f64,
            completion: if done { w.alpha_complete } else { 0.0 },
            coverage: w.alpha_coverage * fresh_cells as f64
                / self.world.grid.n_cells() as f64,
            energy: -w.eta_energy * energies_kwh.iter().sum::<f64>(),
            carbon: -w.eta_carbon * co2_kg,
            revisit: -w.xi_revisit * revisit_count as f64,
            truncation: if truncated { -w.xi_truncation } else { 0.0 },
            throughput: w.zeta_throughput * fleet_mean_throughput,
            spread: w.zeta_spread * self.knowledge_spread(),
            shaping: phi_after - phi_before,
            charge: -w.beta_charge * c_t * n_charging as f64,
        };

        self.done = done;
        self.truncated = truncated;
        // Next step's carbon price, visible in the observations below.
        self.carbon_intensity = sample_carbon_intensity(&mut self.rng, &self.energy);

        let transition = Transition {
            decoded,
            commands,
            energies_kwh,
            newly_detected: report.newly_detected,
            newly_informed,
            hits: report.hits,
            fleet_mean_throughput,
            grid_kwh,
            co2_kg,
            terms,
            team_reward: terms.total(),
            done,
            truncated,
        };
        Ok(StepOutcome {
            observations: self.observations(),
            team_reward: transition.team_reward,
            done,
            truncated,
            transition,
        })
    }
}
