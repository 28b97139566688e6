//! Per-agent observation vectors with a fixed, index-stable layout.
//!
//! Layout for n hotspots (dimension 19 + 4n):
//!   [0]  x / (W-1)
//!   [1]  y / (H-1)
//!   [2]  battery / B_max
//!   [3]  (rho - rho_min) / (rho_max - rho_min)
//!   [4]  mean normalized throughput over graph neighbors, 0 if isolated
//!   [5 + 4j .. 9 + 4j]  hotspot j: dx/W, dy/H, detected, own knowledge bit
//!   [5 + 4n .. 13 + 4n] four nearest graph neighbors: dx/W, dy/H, zero-padded
//!   [13 + 4n]  degree / (N-1)
//!   [14 + 4n]  (c_t - c_min) / (c_max - c_min)
//!   [15 + 4n]  Manhattan distance to nearest depot / (W+H)
//!   [16 + 4n]  fraction of hotspots detected
//!   [17 + 4n]  fraction of hotspots informed
//!   [18 + 4n]  t / T_max
//!
//! Divisions whose denominator degenerates (1-wide grid, single agent, zero
//! hotspots, zero-width carbon range) produce 0.

use crate::knowledge::{CommGraph, KnowledgeMatrix};
use crate::phy::Phy;
use crate::world::{cell_distance_m, manhattan_cells, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObsLayout {
    pub n_targets: usize,
}

impl ObsLayout {
    pub fn new(n_targets: usize) -> ObsLayout {
        ObsLayout { n_targets }
    }

    pub const POSITION: usize = 0;
    pub const BATTERY: usize = 2;
    pub const PILOT: usize = 3;
    pub const OWN_THROUGHPUT: usize = 4;
    pub const HOTSPOTS: usize = 5;

    pub fn hotspot_block(&self, j: usize) -> usize {
        Self::HOTSPOTS + 4 * j
    }

    pub fn neighbors_start(&self) -> usize {
        Self::HOTSPOTS + 4 * self.n_targets
    }

    pub fn degree(&self) -> usize {
        self.neighbors_start() + 8
    }

    pub fn carbon(&self) -> usize {
        self.degree() + 1
    }

    pub fn depot_distance(&self) -> usize {
        self.degree() + 2
    }

    pub fn frac_detected(&self) -> usize {
        self.degree() + 3
    }

    pub fn frac_informed(&self) -> usize {
        self.degree() + 4
    }

    pub fn time(&self) -> usize {
        self.degree() + 5
    }

    pub fn dim(&self) -> usize {
        19 + 4 * self.n_targets
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub struct ObsContext<'a> {
    pub world: &'a WorldState,
    pub graph: &'a CommGraph,
    pub knowledge: &'a KnowledgeMatrix,
    pub detected: &'a [bool],
    pub informed: &'a [bool],
    pub carbon_intensity: f64,
    pub phy: &'a Phy,
    pub battery_capacity_kwh: f64,
    pub carbon_range: (f64, f64),
    pub t_max: u32,
}

pub fn build_observation(ctx: &ObsContext, agent: usize) -> Vec<f64> {
    let layout = ObsLayout::new(ctx.world.hotspots.len());
    let mut v = vec![0.0; layout.dim()];
    let grid = &ctx.world.grid;
    let n = ctx.world.uavs.len();
    let me = &ctx.world.uavs[agent];
    let (x, y) = me.cell;
    let (w, h) = (grid.width_cells as f64, grid.height_cells as f64);

    v[ObsLayout::POSITION] = ratio(x as f64, w - 1.0);
    v[ObsLayout::POSITION + 1] = ratio(y as f64, h - 1.0);
    v[ObsLayout::BATTERY] = ratio(me.battery_kwh, ctx.battery_capacity_kwh);
    let rho_span = ctx.phy.params.pilot_max - ctx.phy.params.pilot_min;
    v[ObsLayout::PILOT] = ratio(me.pilot_density - ctx.phy.params.pilot_min, rho_span);

    let load = 1.0 - me.pilot_density;
    let neighbors: Vec<usize> = ctx.graph.neighbors(agent).collect();
    if !neighbors.is_empty() {
        let sum: f64 = neighbors
            .iter()
            .map(|&j| ctx.phy.normalized_throughput(ctx.graph.snr_db[agent][j], load))
            .sum();
        v[ObsLayout::OWN_THROUGHPUT] = sum / neighbors.len() as f64;
    }

    for (j, hotspot) in ctx.world.hotspots.iter().enumerate() {
        let base = layout.hotspot_block(j);
        v[base] = (hotspot.cell.0 as f64 - x as f64) / w;
        v[base + 1] = (hotspot.cell.1 as f64 - y as f64) / h;
        v[base + 2] = if ctx.detected[j] { 1.0 } else { 0.0 };
        v[base + 3] = if ctx.knowledge.get(agent, j) { 1.0 } else { 0.0 };
    }

    // Four nearest graph neighbors by Euclidean cell distance, index order
    // breaking ties.
    let mut ranked: Vec<(f64, usize)> = neighbors
        .iter()
        .map(|&j| {
            (cell_distance_m(me.cell, ctx.world.uavs[j].cell, grid.cell_size_m), j)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    for (slot, &(_, j)) in ranked.iter().take(4).enumerate() {
        let base = layout.neighbors_start() + 2 * slot;
        let (nx, ny) = ctx.world.uavs[j].cell;
        v[base] = (nx as f64 - x as f64) / w;
        v[base + 1] = (ny as f64 - y as f64) / h;
    }

    v[layout.degree()] = ratio(neighbors.len() as f64, n as f64 - 1.0);
    let (c_min, c_max) = ctx.carbon_range;
    v[layout.carbon()] = ratio(ctx.carbon_intensity - c_min, c_max - c_min);
    let depot = grid.nearest_depot(me.cell);
    v[layout.depot_distance()] =
        manhattan_cells(me.cell, depot) as f64 / (grid.width_cells + grid.height_cells) as f64;
    let n_targets = ctx.world.hotspots.len() as f64;
    v[layout.frac_detected()] =
        ratio(ctx.detected.iter().filter(|&&d| d).count() as f64, n_targets);
    v[layout.frac_informed()] =
        ratio(ctx.informed.iter().filter(|&&d| d).count() as f64, n_targets);
    v[layout.time()] = ctx.world.t as f64 / ctx.t_max as f64;
    v
}
