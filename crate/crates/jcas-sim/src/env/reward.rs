//! Reward weights and the itemized per-step reward ledger.

use crate::error::{Result, SimError};
use serde::{Deserialize, Serialize};

/// Weight magnitudes; signs are applied where each term enters the reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    /// Per hotspot first detected this step.
    pub alpha_detect: f64,
    /// Per hotspot first informed this step.
    pub alpha_inform: f64,
    /// Once, when the last hotspot becomes informed.
    pub alpha_complete: f64,
    /// Times the fraction of grid cells first visited this step.
    pub alpha_coverage: f64,
    /// Energy penalty per kWh consumed.
    pub eta_energy: f64,
    /// Carbon penalty per kg CO2 attributed to grid charging.
    pub eta_carbon: f64,
    /// Per agent entering an already-visited cell.
    pub xi_revisit: f64,
    /// Once, if the episode truncates without completing.
    pub xi_truncation: f64,
    /// Times the fleet-mean best-link normalized throughput.
    pub zeta_throughput: f64,
    /// Times the mean knowledge fraction over detected hotspots.
    pub zeta_spread: f64,
    /// Potential coefficient on mean normalized distance to the nearest
    /// undetected hotspot; enters as a potential difference.
    pub beta_distance: f64,
    /// Direct penalty per charging agent, scaled by carbon intensity.
    pub beta_charge: f64,
}

impl Default for RewardWeights {
    fn default() -> RewardWeights {
        RewardWeights {
            alpha_detect: 7.0,
            alpha_inform: 4.0,
            alpha_complete: 10.0,
            alpha_coverage: 0.5,
            eta_energy: 0.2,
            eta_carbon: 0.1,
            xi_revisit: 0.01,
            xi_truncation: 0.4,
            zeta_throughput: 0.5,
            zeta_spread: 0.1,
            beta_distance: 0.1,
            beta_charge: 0.05,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("alpha_detect", self.alpha_detect),
            ("alpha_inform", self.alpha_inform),
            ("alpha_complete", self.alpha_complete),
            ("alpha_coverage", self.alpha_coverage),
            ("eta_energy", self.eta_energy),
            ("eta_carbon", self.eta_carbon),
            ("xi_revisit", self.xi_revisit),
            ("xi_truncation", self.xi_truncation),
            ("zeta_throughput", self.zeta_throughput),
            ("zeta_spread", self.zeta_spread),
            ("beta_distance", self.beta_distance),
            ("beta_charge", self.beta_charge),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(SimError::Config(format!(
                    "reward weight {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One step's reward, itemized. Every field is already signed, so the team
/// reward is the plain sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardTerms {
    pub detection: f64,
    pub inform: f64,
    pub completion: f64,
    pub coverage: f64,
    pub energy: f64,
    pub carbon: f64,
    pub revisit: f64,
    pub truncation: f64,
    pub throughput: f64,
    pub spread: f64,
    pub shaping: f64,
    pub charge: f64,
}

impl RewardTerms {
    pub fn total(&self) -> f64 {
        self.detection
            + self.inform
            + self.completion
            + self.coverage
            + self.energy
            + self.carbon
            + self.revisit
            + self.truncation
            + self.throughput
            + self.spread
            + self.shaping
            + self.charge
    }
}
