//! JSON-lines episode traces: one meta record, then one record per step.
//! Schema is versioned; identical runs produce byte-identical streams.

use crate::env::action::ActionVector;
use crate::env::Transition;
use crate::error::Result;
use crate::world::WorldState;
use serde::Serialize;
use std::io::Write;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct TraceMeta<'a> {
    pub kind: &'static str,
    pub schema_version: u32,
    pub policy: &'a str,
    pub episode_seed: u64,
    pub n_uavs: usize,
    pub n_targets: usize,
    pub grid_width: usize,
    pub grid_height: usize,
    pub cell_size_m: f64,
}

#[derive(Serialize)]
struct UavRecord {
    cell: (usize, usize),
    battery_kwh: f64,
    pilot_density: f64,
    returning: bool,
    inert: bool,
}

#[derive(Serialize)]
struct StepRecord<'a> {
    kind: &'static str,
    t: u32,
    actions: &'a [ActionVector],
    uavs: Vec<UavRecord>,
    transition: &'a Transition,
}

pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W, meta: &TraceMeta) -> Result<TraceWriter<W>> {
        serde_json::to_writer(&mut out, meta).map_err(io_err)?;
        out.write_all(b"\n")?;
        Ok(TraceWriter { out })
    }

    /// Records the post-step world alongside the submitted actions and the
    /// transition produced by them.
    pub fn write_step(
        &mut self,
        world: &WorldState,
        actions: &[ActionVector],
        transition: &Transition,
    ) -> Result<()> {
        let record = StepRecord {
            kind: "step",
            t: world.t,
            actions,
            uavs: world
                .uavs
                .iter()
                .map(|u| UavRecord {
                    cell: u.cell,
                    battery_kwh: u.battery_kwh,
                    pilot_density: u.pilot_density,
                    returning: u.returning_to_base,
                    inert: u.inert,
                })
                .collect(),
            transition,
        };
        serde_json::to_writer(&mut self.out, &record).map_err(io_err)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn io_err(e: serde_json::Error) -> crate::error::SimError {
    crate::error::SimError::Io(std::io::Error::other(e))
}

pub fn meta_for<'a>(
    policy: &'a str,
    episode_seed: u64,
    world: &WorldState,
) -> TraceMeta<'a> {
    TraceMeta {
        kind: "meta",
        schema_version: TRACE_SCHEMA_VERSION,
        policy,
        episode_seed,
        n_uavs: world.uavs.len(),
        n_targets: world.hotspots.len(),
        grid_width: world.grid.width_cells,
        grid_height: world.grid.height_cells,
        cell_size_m: world.grid.cell_size_m,
    }
}
