//! Per-step energy accounting, battery dynamics, and CO2 attribution.
//!
//! Charging draws the nominal per-step quantum whenever a UAV sits on a depot
//! cell; the battery stores what fits below capacity, but grid draw and CO2
//! are attributed to the nominal draw. Grid draw is the non-renewable share of
//! that quantum, and emissions price it at the step's carbon intensity.

use crate::error::{Result, SimError};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub b_max_kwh: f64,
    /// Battery level below which the return-to-base override engages.
    pub rtb_threshold_kwh: f64,
    /// Fraction of capacity at which a returned UAV resumes its mission.
    pub resume_charge_fraction: f64,
    /// Energy added per step spent on a depot cell. One step is one charge
    /// quantum; a full recharge from empty takes four steps.
    pub charge_rate_kwh_per_step: f64,
    pub e_move_kwh: f64,
    /// Sensing cost at maximum pilot density; scales linearly with the pilot
    /// fraction actually used.
    pub e_sense_base_kwh: f64,
    pub e_comm_kwh: f64,
    pub renewable_share: f64,
    pub carbon_intensity_min_kg_per_kwh: f64,
    pub carbon_intensity_max_kg_per_kwh: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        EnergyParams {
            b_max_kwh: 0.20,
            rtb_threshold_kwh: 0.04,
            resume_charge_fraction: 0.8,
            charge_rate_kwh_per_step: 0.05,
            e_move_kwh: 8e-4,
            e_sense_base_kwh: 2e-4,
            e_comm_kwh: 5e-5,
            renewable_share: 0.1,
            carbon_intensity_min_kg_per_kwh: 0.25,
            carbon_intensity_max_kg_per_kwh: 0.40,
        }
    }
}

impl EnergyParams {
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(SimError::Config(msg));
        for (name, v) in [
            ("b_max_kwh", self.b_max_kwh),
            ("charge_rate_kwh_per_step", self.charge_rate_kwh_per_step),
        ] {
            if !(v > 0.0) {
                return err(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("rtb_threshold_kwh", self.rtb_threshold_kwh),
            ("e_move_kwh", self.e_move_kwh),
            ("e_sense_base_kwh", self.e_sense_base_kwh),
            ("e_comm_kwh", self.e_comm_kwh),
        ] {
            if !(v >= 0.0) {
                return err(format!("{name} must be nonnegative, got {v}"));
            }
        }
        if self.rtb_threshold_kwh >= self.b_max_kwh {
            return err(format!(
                "rtb_threshold_kwh {} must be below b_max_kwh {}",
                self.rtb_threshold_kwh, self.b_max_kwh
            ));
        }
        if !(0.0..=1.0).contains(&self.renewable_share) {
            return err(format!("renewable_share must be in [0,1], got {}", self.renewable_share));
        }
        if !(0.0..=1.0).contains(&self.resume_charge_fraction) {
            return err(format!(
                "resume_charge_fraction must be in [0,1], got {}",
                self.resume_charge_fraction
            ));
        }
        if self.carbon_intensity_min_kg_per_kwh > self.carbon_intensity_max_kg_per_kwh
            || self.carbon_intensity_min_kg_per_kwh < 0.0
        {
            return err(format!(
                "carbon intensity range [{}, {}] is invalid",
                self.carbon_intensity_min_kg_per_kwh, self.carbon_intensity_max_kg_per_kwh
            ));
        }
        Ok(())
    }

    pub fn resume_threshold_kwh(&self) -> f64 {
        self.resume_charge_fraction * self.b_max_kwh
    }
}

/// Energy consumed in one step: a fixed propulsion cost when the cell changed,
/// sensing cost proportional to pilot density, and a constant comm overhead.
pub fn step_energy_kwh(moved: bool, pilot_density: f64, pilot_max: f64, p: &EnergyParams) -> f64 {
    let move_cost = if moved { p.e_move_kwh } else { 0.0 };
    move_cost + p.e_sense_base_kwh * (pilot_density / pilot_max) + p.e_comm_kwh
}

/// Battery update: debit consumption, add the charge quantum when on a depot,
/// clamp to [0, capacity].
pub fn update_battery(b_kwh: f64, consumed_kwh: f64, at_depot: bool, p: &EnergyParams) -> f64 {
    let charge = if at_depot { p.charge_rate_kwh_per_step } else { 0.0 };
    (b_kwh - consumed_kwh + charge).clamp(0.0, p.b_max_kwh)
}

/// Splits charging energy into grid draw and CO2: the non-renewable share of
/// the charge hits the grid, priced at the current carbon intensity.
pub fn carbon_emission_kg(
    charged_kwh: f64,
    carbon_intensity_kg_per_kwh: f64,
    p: &EnergyParams,
) -> (f64, f64) {
    let grid_kwh = (1.0 - p.renewable_share) * charged_kwh;
    (grid_kwh, grid_kwh * carbon_intensity_kg_per_kwh)
}

/// Uniform draw from the configured carbon-intensity range.
pub fn sample_carbon_intensity(rng: &mut ChaCha8Rng, p: &EnergyParams) -> f64 {
    let span = p.carbon_intensity_max_kg_per_kwh - p.carbon_intensity_min_kg_per_kwh;
    p.carbon_intensity_min_kg_per_kwh + rng.random::<f64>() * span
}
