//! Continuous action decoding: a 2D vector in [-1,1]^2 selects a motion and a
//! pilot density.

use crate::error::{Result, SimError};
use crate::world::Direction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionVector {
    pub u_dir: f64,
    pub u_pilot: f64,
}

impl ActionVector {
    pub fn new(u_dir: f64, u_pilot: f64) -> ActionVector {
        ActionVector { u_dir, u_pilot }
    }
}

/// Five equal bins over [-1,1]. The stay bin is closed above so u_dir = 1
/// decodes without a sixth case.
fn direction_bin(u: f64) -> Direction {
    if u < -0.6 {
        Direction::Up
    } else if u < -0.2 {
        Direction::Down
    } else if u < 0.2 {
        Direction::Left
    } else if u < 0.6 {
        Direction::Right
    } else {
        Direction::Stay
    }
}

/// Decodes one action. Components are clipped to [-1,1] first; the pilot map
/// is affine with exact endpoints (u=-1 gives rho_min, u=+1 gives rho_max).
pub fn decode_action(
    a: ActionVector,
    rho_min: f64,
    rho_max: f64,
) -> Result<(Direction, f64)> {
    if a.u_dir.is_nan() || a.u_pilot.is_nan() {
        return Err(SimError::Protocol(format!(
            "NaN action component ({}, {})",
            a.u_dir, a.u_pilot
        )));
    }
    let u_dir = a.u_dir.clamp(-1.0, 1.0);
    let u_pilot = a.u_pilot.clamp(-1.0, 1.0);
    let rho = (rho_min + (u_pilot + 1.0) / 2.0 * (rho_max - rho_min)).clamp(rho_min, rho_max);
    Ok((direction_bin(u_dir), rho))
}

/// Inverse used by scripted policies: bin midpoints for the direction and the
/// inverse affine map for the pilot.
pub fn encode_action(direction: Direction, rho: f64, rho_min: f64, rho_max: f64) -> ActionVector {
    let u_dir = match direction {
        Direction::Up => -0.8,
        Direction::Down => -0.4,
        Direction::Left => 0.0,
        Direction::Right => 0.4,
        Direction::Stay => 0.8,
    };
    let u_pilot = if rho_max > rho_min {
        (2.0 * (rho - rho_min) / (rho_max - rho_min) - 1.0).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    ActionVector::new(u_dir, u_pilot)
}
