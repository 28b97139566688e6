//! Grid geometry, mission spawning, and per-UAV state.
//!
//! Axis convention: origin at the top-left cell, x grows right, y grows down,
//! so `Up` decreases y. Off-grid moves clamp to a stay. UAVs may co-occupy
//! cells; there is no collision model.

use crate::error::{Result, SimError};
use crate::rng::stream_rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

pub type Cell = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width_cells: usize,
    pub height_cells: usize,
    pub cell_size_m: f64,
    pub depot_cells: Vec<Cell>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width_cells == 0 || self.height_cells == 0 {
            return Err(SimError::Config(format!(
                "grid must be at least 1x1, got {}x{}",
                self.width_cells, self.height_cells
            )));
        }
        if !(self.cell_size_m > 0.0) {
            return Err(SimError::Config(format!(
                "cell_size_m must be positive, got {}",
                self.cell_size_m
            )));
        }
        if self.depot_cells.is_empty() {
            return Err(SimError::Config("at least one depot cell is required".into()));
        }
        for &d in &self.depot_cells {
            if !self.contains(d) {
                return Err(SimError::Config(format!("depot {d:?} is outside the grid")));
            }
        }
        for (i, &a) in self.depot_cells.iter().enumerate() {
            if self.depot_cells[..i].contains(&a) {
                return Err(SimError::Config(format!("duplicate depot cell {a:?}")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.0 < self.width_cells && cell.1 < self.height_cells
    }

    pub fn n_cells(&self) -> usize {
        self.width_cells * self.height_cells
    }

    pub fn cell_index(&self, cell: Cell) -> usize {
        cell.1 * self.width_cells + cell.0
    }

    pub fn is_depot(&self, cell: Cell) -> bool {
        self.depot_cells.contains(&cell)
    }

    /// Depot at minimum Manhattan distance; ties go to the first in the list.
    pub fn nearest_depot(&self, cell: Cell) -> Cell {
        *self
            .depot_cells
            .iter()
            .min_by_key(|&&d| manhattan_cells(cell, d))
            .expect("validated grids have at least one depot")
    }
}

/// One grid move, clamped at the boundary (an off-grid move becomes a stay).
pub fn apply_move(cell: Cell, dir: Direction, grid: &GridSpec) -> Cell {
    let (x, y) = cell;
    match dir {
        Direction::Up if y > 0 => (x, y - 1),
        Direction::Down if y + 1 < grid.height_cells => (x, y + 1),
        Direction::Left if x > 0 => (x - 1, y),
        Direction::Right if x + 1 < grid.width_cells => (x + 1, y),
        _ => (x, y),
    }
}

/// Euclidean distance between cell centers in meters. Callers apply the
/// phy-layer minimum-range floor.
pub fn cell_distance_m(a: Cell, b: Cell, cell_size_m: f64) -> f64 {
    let dx = a.0 as f64 - b.0 as f64;
    let dy = a.1 as f64 - b.1 as f64;
    cell_size_m * (dx * dx + dy * dy).sqrt()
}

pub fn manhattan_cells(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UavState {
    pub cell: Cell,
    pub battery_kwh: f64,
    pub pilot_density: f64,
    pub returning_to_base: bool,
    /// Battery hit zero away from a depot: forced stay, no sensing, no comm
    /// for the rest of the episode.
    pub inert: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub cell: Cell,
    pub detected_at: Option<u32>,
    pub informed_at: Option<u32>,
}

impl Hotspot {
    pub fn new(cell: Cell) -> Hotspot {
        Hotspot { cell, detected_at: None, informed_at: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub grid: GridSpec,
    pub uavs: Vec<UavState>,
    pub hotspots: Vec<Hotspot>,
    pub t: u32,
}

/// Spawns a mission: hotspots uniformly on distinct non-depot cells, all UAVs
/// at the first depot with full battery and minimum pilot density. Pure in the
/// seed: the same seed always yields the same world.
pub fn spawn_mission(
    seed: u64,
    grid: &GridSpec,
    n_uavs: usize,
    n_targets: usize,
    battery_kwh: f64,
    pilot_density: f64,
) -> Result<WorldState> {
    grid.validate()?;
    if n_uavs == 0 {
        return Err(SimError::Config("n_uavs must be at least 1".into()));
    }
    let eligible: Vec<Cell> = (0..grid.height_cells)
        .flat_map(|y| (0..grid.width_cells).map(move |x| (x, y)))
        .filter(|&c| !grid.is_depot(c))
        .collect();
    if n_targets > eligible.len() {
        return Err(SimError::Config(format!(
            "{n_targets} hotspots do not fit on {} non-depot cells",
            eligible.len()
        )));
    }

    // Partial Fisher-Yates over the eligible cells in row-major order: uniform
    // without replacement, bounded work, deterministic in the seed.
    let mut rng = stream_rng(seed, 0x57);
    let mut cells = eligible;
    for i in 0..n_targets {
        let j = rng.random_range(i..cells.len());
        cells.swap(i, j);
    }
    let hotspots = cells[..n_targets]
        .iter()
        .map(|&cell| Hotspot::new(cell))
        .collect();

    let start = grid.depot_cells[0];
    let uavs = (0..n_uavs)
        .map(|_| UavState {
            cell: start,
            battery_kwh,
            pilot_density,
            returning_to_base: false,
            inert: false,
        })
        .collect();

    Ok(WorldState { grid: grid.clone(), uavs, hotspots, t: 0 })
}
