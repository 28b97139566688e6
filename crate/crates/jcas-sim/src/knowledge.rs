//! Communication graph construction, detection consensus, and OR-propagation
//! of hotspot knowledge.
//!
//! A hotspot becomes detected only when enough agents return a positive
//! detection in the same round. Local detections set per-agent knowledge bits
//! regardless of whether the consensus bar was met, and propagation then ORs
//! knowledge across each connected component of the graph.

use crate::error::Result;
use crate::phy::Phy;
use crate::world::{cell_distance_m, Cell};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    pub n: usize,
    /// Symmetric, no self-loops; rows and columns of inactive agents are
    /// entirely false.
    pub adjacency: Vec<Vec<bool>>,
    /// Pairwise comm SNR at the distance-floored link geometry, filled for all
    /// pairs regardless of adjacency.
    pub snr_db: Vec<Vec<f64>>,
}

impl CommGraph {
    pub fn empty(n: usize) -> CommGraph {
        CommGraph {
            n,
            adjacency: vec![vec![false; n]; n],
            snr_db: vec![vec![0.0; n]; n],
        }
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[i]
            .iter()
            .enumerate()
            .filter_map(|(j, &edge)| edge.then_some(j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].iter().filter(|&&e| e).count()
    }
}

/// Links exist between active agents whose pairwise comm SNR clears the edge
/// threshold; distances are floored at the phy minimum range.
pub fn build_comm_graph(
    cells: &[Cell],
    active: &[bool],
    cell_size_m: f64,
    phy: &Phy,
) -> Result<CommGraph> {
    let n = cells.len();
    let mut g = CommGraph::empty(n);
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = cell_distance_m(cells[i], cells[j], cell_size_m)
                .max(phy.params.min_range_m);
            let snr = phy.comm_snr_db(dist)?;
            g.snr_db[i][j] = snr;
            g.adjacency[i][j] =
                active[i] && active[j] && snr >= phy.params.comm_edge_snr_db;
        }
    }
    Ok(g)
}

/// N_agents x n_targets bit matrix of per-agent hotspot awareness. Bits only
/// ever turn on within an episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeMatrix {
    pub n_agents: usize,
    pub n_targets: usize,
    bits: Vec<bool>,
}

impl KnowledgeMatrix {
    pub fn new(n_agents: usize, n_targets: usize) -> KnowledgeMatrix {
        KnowledgeMatrix { n_agents, n_targets, bits: vec![false; n_agents * n_targets] }
    }

    pub fn get(&self, agent: usize, target: usize) -> bool {
        self.bits[agent * self.n_targets + target]
    }

    pub fn set(&mut self, agent: usize, target: usize) {
        self.bits[agent * self.n_targets + target] = true;
    }

    pub fn count_knowing(&self, target: usize) -> usize {
        (0..self.n_agents).filter(|&i| self.get(i, target)).count()
    }

    /// True when every agent the mask requires knows the target.
    pub fn known_by_all(&self, target: usize, required: &[bool]) -> bool {
        (0..self.n_agents).all(|i| !required[i] || self.get(i, target))
    }

    fn or_row_into(&self, src: usize, dst: &mut [bool]) {
        let row = &self.bits[src * self.n_targets..(src + 1) * self.n_targets];
        for (d, &s) in dst.iter_mut().zip(row) {
            *d |= s;
        }
    }
}

/// Outcome of one detection round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionReport {
    /// Hotspot indices whose consensus bar was met this round.
    pub newly_detected: Vec<usize>,
    /// (agent, hotspot) pairs with a positive local detection this round.
    pub hits: Vec<(usize, usize)>,
}

/// Runs one sensing round over all undetected hotspots. Each sensing-capable
/// agent draws an independent Bernoulli with its own detection probability
/// (or, in deterministic mode, detects iff p > 0.5). Positive locals set
/// knowledge bits; a hotspot is detected when at least `theta_detect` agents
/// hit it in this round. Draw order is fixed (hotspot-major, agent-minor) so
/// a fixed seed reproduces the round bit-for-bit.
#[allow(clippy::too_many_arguments)]
pub fn detection_round(
    uav_cells: &[Cell],
    comm_loads: &[f64],
    can_sense: &[bool],
    hotspot_cells: &[Cell],
    already_detected: &[bool],
    knowledge: &mut KnowledgeMatrix,
    cell_size_m: f64,
    phy: &Phy,
    theta_detect: usize,
    deterministic: bool,
    rng: &mut ChaCha8Rng,
) -> Result<DetectionReport> {
    let mut report = DetectionReport { newly_detected: Vec::new(), hits: Vec::new() };
    for (j, &hotspot) in hotspot_cells.iter().enumerate() {
        if already_detected[j] {
            continue;
        }
        let mut positives = 0usize;
        for (i, &cell) in uav_cells.iter().enumerate() {
            if !can_sense[i] {
                continue;
            }
            let range = cell_distance_m(cell, hotspot, cell_size_m);
            let p = phy.detection_probability_at(range, comm_loads[i])?;
            let hit = if deterministic { p > 0.5 } else { rng.random::<f64>() < p };
            if hit {
                positives += 1;
                knowledge.set(i, j);
                report.hits.push((i, j));
            }
        }
        if positives >= theta_detect {
            report.newly_detected.push(j);
        }
    }
    Ok(report)
}

/// OR-consensus: each agent repeatedly merges its neighbors' knowledge, for at
/// most n_agents rounds or until a fixpoint. The result equals the
/// component-wise OR: every agent ends up with the union of its connected
/// component's knowledge.
pub fn propagate(knowledge: &KnowledgeMatrix, graph: &CommGraph) -> KnowledgeMatrix {
    let mut current = knowledge.clone();
    for _ in 0..knowledge.n_agents {
        let mut next = current.clone();
        for i in 0..knowledge.n_agents {
            let dst_range = i * knowledge.n_targets..(i + 1) * knowledge.n_targets;
            let mut row: Vec<bool> = current.bits[dst_range.clone()].to_vec();
            for j in graph.neighbors(i) {
                current.or_row_into(j, &mut row);
            }
            next.bits[dst_range].copy_from_slice(&row);
        }
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// A hotspot is informed when it is detected and every required agent knows
/// it. The required mask selects whether inert agents still count.
pub fn informed_status(
    knowledge: &KnowledgeMatrix,
    detected: &[bool],
    required: &[bool],
) -> Vec<bool> {
    (0..knowledge.n_targets)
        .map(|j| detected[j] && knowledge.known_by_all(j, required))
        .collect()
}
