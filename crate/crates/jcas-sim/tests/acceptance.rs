// End-to-end acceptance checks. Each test prints one PASS line so a log scrape
// can confirm every criterion ran. Numbered tests map to the release checklist.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;

use jcas_sim::config::SimConfig;
use jcas_sim::energy::{carbon_emission_kg, EnergyParams};
use jcas_sim::env::action::{decode_action, ActionVector};
use jcas_sim::env::JcasEnv;
use jcas_sim::harness::evaluate;
use jcas_sim::knowledge::{propagate, CommGraph, KnowledgeMatrix};
use jcas_sim::metrics::mean_and_se;
use jcas_sim::phy::{linear_to_db, Phy, PhyParams};
use jcas_sim::policy::gae::compute_gae;
use jcas_sim::policy::mlp::{gradient_check, ActorCritic};
use jcas_sim::policy::ppo::Trainer;
use jcas_sim::policy::PolicyRegistry;
use jcas_sim::rng::stream_rng;
use jcas_sim::world::{manhattan_cells, Cell, WorldState};

#[test]
fn acceptance_1_physics_golden_values() {
    let start = Instant::now();
    let phy = Phy::new(PhyParams::default()).unwrap();

    // Doubling range inside the penalty-free component costs exactly 40 dB per
    // decade of the fourth-power law.
    let ratio_db =
        linear_to_db(phy.echo_power_w(800.0).unwrap() / phy.echo_power_w(400.0).unwrap());
    let expected = -40.0 * 2.0f64.log10();
    assert!(
        (ratio_db - expected).abs() < 1e-9,
        "echo ratio {ratio_db} vs {expected}"
    );

    // Zero margin sits exactly on the logistic midpoint.
    assert_eq!(phy.detection_probability(0.0), 0.5);

    // Pilot decode is affine and exact at both rails.
    let p = PhyParams::default();
    let (_, rho_lo) =
        decode_action(ActionVector::new(0.9, -1.0), p.pilot_min, p.pilot_max).unwrap();
    let (_, rho_hi) = decode_action(ActionVector::new(0.9, 1.0), p.pilot_min, p.pilot_max).unwrap();
    assert_eq!(rho_lo, 0.01);
    assert_eq!(rho_hi, 0.30);

    // 0.3 kWh charged at 10% grid share and 0.25 kg/kWh.
    let (grid, co2) = carbon_emission_kg(0.3, 0.25, &EnergyParams::default());
    assert!((grid - 0.27).abs() < 1e-12, "grid {grid}");
    assert!((co2 - 0.0675).abs() < 1e-12, "co2 {co2}");

    assert!(start.elapsed() < Duration::from_secs(1));
    println!("ACCEPTANCE 1 PASS: physics golden values match closed forms");
}

#[test]
fn acceptance_2_propagation_matches_bfs_oracle() {
    let start = Instant::now();
    let mut rng = stream_rng(0xC2, 0);

    for case in 0..500 {
        let n = rng.random_range(1..=20);
        let n_targets = rng.random_range(1..=8);
        let density: f64 = rng.random_range(0.0..0.5);

        let mut graph = CommGraph::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < density {
                    graph.adjacency[i][j] = true;
                    graph.adjacency[j][i] = true;
                }
            }
        }

        let mut knowledge = KnowledgeMatrix::new(n, n_targets);
        for a in 0..n {
            for t in 0..n_targets {
                if rng.random::<f64>() < 0.3 {
                    knowledge.set(a, t);
                }
            }
        }

        let propagated = propagate(&knowledge, &graph);
        let oracle = bfs_component_or(&knowledge, &graph, n, n_targets);
        for a in 0..n {
            for t in 0..n_targets {
                assert_eq!(
                    propagated.get(a, t),
                    oracle.get(a, t),
                    "case {case} agent {a} target {t}"
                );
            }
        }

        // A second flood over the same graph must be a no-op.
        let again = propagate(&propagated, &graph);
        for a in 0..n {
            for t in 0..n_targets {
                assert_eq!(again.get(a, t), propagated.get(a, t), "case {case} idempotence");
            }
        }
    }

    assert!(start.elapsed() < Duration::from_secs(5));
    println!("ACCEPTANCE 2 PASS: 500 random graphs agree with BFS component-OR");
}

#[test]
fn acceptance_3_reward_ledger_fuzz() {
    let start = Instant::now();
    let mut cfg = SimConfig::default();
    cfg.env.n_uavs = 4;
    let alpha_det = cfg.reward.alpha_detect;
    let alpha_inf = cfg.reward.alpha_inform;

    let mut rng = stream_rng(0xC3, 0);
    let mut total_steps = 0usize;
    let mut episode = 0u64;

    while total_steps < 1000 {
        let mut env = JcasEnv::new(&cfg, 50_000 + episode).unwrap();
        episode += 1;

        let mut detected_seen: HashSet<usize> = HashSet::new();
        let mut informed_seen: HashSet<usize> = HashSet::new();
        let phi_start = potential_oracle(env.world(), &cfg);
        let mut shaping_sum = 0.0;

        loop {
            let actions: Vec<ActionVector> = (0..cfg.env.n_uavs)
                .map(|_| {
                    ActionVector::new(
                        rng.random_range(-1.0..=1.0),
                        rng.random_range(-1.0..=1.0),
                    )
                })
                .collect();
            let out = env.step(&actions).unwrap();
            total_steps += 1;
            let tr = &out.transition;

            // Terms must sum to the scalar reward the policy sees.
            assert!(
                (tr.terms.total() - out.team_reward).abs() <= 1e-9,
                "ledger drift at step {total_steps}"
            );

            // Sparse bonuses fire at most once per hotspot per episode.
            for &h in &tr.newly_detected {
                assert!(detected_seen.insert(h), "hotspot {h} detected twice");
            }
            for &h in &tr.newly_informed {
                assert!(informed_seen.insert(h), "hotspot {h} informed twice");
            }
            assert_eq!(tr.terms.detection, alpha_det * tr.newly_detected.len() as f64);
            assert_eq!(tr.terms.inform, alpha_inf * tr.newly_informed.len() as f64);
            if tr.terms.completion != 0.0 {
                assert!(out.done, "completion bonus outside terminal step");
            }

            shaping_sum += tr.terms.shaping;
            let phi_now = potential_oracle(env.world(), &cfg);
            // Shaping telescopes: the running sum equals the potential delta.
            assert!(
                (shaping_sum - (phi_now - phi_start)).abs() <= 1e-9,
                "shaping not telescoping at step {total_steps}"
            );

            if out.done || out.truncated || total_steps >= 1000 {
                break;
            }
        }
    }

    assert!(start.elapsed() < Duration::from_secs(10));
    println!("ACCEPTANCE 3 PASS: {total_steps} fuzzed steps keep the reward ledger exact");
}

#[test]
fn acceptance_4_cli_eval_is_reproducible() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_jcas-sim");

    let run = |tag: &str| {
        let out_csv = dir.path().join(format!("{tag}.csv"));
        let trace_dir = dir.path().join(format!("{tag}_traces"));
        let status = Command::new(bin)
            .args([
                "eval",
                "--seed",
                "7",
                "--episodes",
                "20",
                "--out",
                out_csv.to_str().unwrap(),
                "--trace-dir",
                trace_dir.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success(), "eval run {tag} failed");
        (fs::read(&out_csv).unwrap(), read_dir_sorted(&trace_dir))
    };

    let (csv_a, traces_a) = run("a");
    let (csv_b, traces_b) = run("b");

    assert_eq!(csv_a, csv_b, "metrics CSV differs between identical runs");
    assert_eq!(traces_a.len(), 20, "expected one trace per episode");
    assert_eq!(traces_a, traces_b, "trace files differ between identical runs");

    assert!(start.elapsed() < Duration::from_secs(30));
    println!("ACCEPTANCE 4 PASS: eval --seed 7 is byte-identical across runs");
}

#[test]
fn acceptance_5_fleet_size_helps_detection() {
    let registry = PolicyRegistry::builtin();
    let mut cells = Vec::new();
    for n in [5usize, 10, 15] {
        let mut cfg = SimConfig::default();
        cfg.env.n_uavs = n;
        let out = evaluate(&cfg, &registry, "adaptive-pilot", 100, 1701, 0, None).unwrap();
        println!(
            "  n_uavs {:2}: success {:.2} +- {:.3}, mean time {:.1}",
            n, out.summary.success_rate, out.summary.success_se, out.summary.mean_mission_time
        );
        cells.push(out.summary);
    }

    for w in cells.windows(2) {
        let slack = w[0].success_se.max(w[1].success_se);
        assert!(
            w[1].success_rate >= w[0].success_rate - slack,
            "success rate dropped beyond one standard error: {} -> {}",
            w[0].success_rate,
            w[1].success_rate
        );
    }
    assert!(
        cells[2].mean_mission_time < cells[0].mean_mission_time,
        "15 drones should finish faster than 5: {} vs {}",
        cells[2].mean_mission_time,
        cells[0].mean_mission_time
    );
    println!("ACCEPTANCE 5 PASS: success rate non-decreasing in fleet size, larger fleet is faster");
}

#[test]
fn acceptance_6_energy_grows_sublinearly() {
    let registry = PolicyRegistry::builtin();
    let energy_at = |n: usize| {
        let mut cfg = SimConfig::default();
        cfg.env.n_uavs = n;
        evaluate(&cfg, &registry, "adaptive-pilot", 100, 1701, 0, None)
            .unwrap()
            .summary
            .mean_energy_kwh
    };

    let e5 = energy_at(5);
    let e20 = energy_at(20);
    let ratio = e20 / e5;
    println!("  energy 5 drones {e5:.4} kWh, 20 drones {e20:.4} kWh, ratio {ratio:.2}");
    assert!(ratio < 4.0, "4x fleet must cost less than 4x energy, got {ratio}");
    println!("ACCEPTANCE 6 PASS: 4x fleet costs {ratio:.2}x energy");
}

#[test]
fn acceptance_7_adaptive_pilot_beats_constant_on_throughput() {
    let registry = PolicyRegistry::builtin();
    for n in [10usize, 15] {
        let mut cfg = SimConfig::default();
        cfg.env.n_uavs = n;
        let per_episode = |policy: &str| {
            let out = evaluate(&cfg, &registry, policy, 100, 1701, 0, None).unwrap();
            let tp: Vec<f64> =
                out.episodes.iter().map(|e| e.mean_norm_throughput).collect();
            mean_and_se(&tp)
        };
        let (mean_a, se_a) = per_episode("adaptive-pilot");
        let (mean_c, se_c) = per_episode("constant-pilot");
        let margin = mean_a - mean_c;
        let joint_se = (se_a * se_a + se_c * se_c).sqrt();
        println!(
            "  n_uavs {n}: adaptive {mean_a:.4} vs constant {mean_c:.4}, margin {margin:.4}, joint se {joint_se:.4}"
        );
        assert!(
            margin > joint_se,
            "adaptive advantage {margin} not outside one joint standard error {joint_se}"
        );
    }
    println!("ACCEPTANCE 7 PASS: adaptive pilot out-throughputs constant beyond one standard error");
}

#[test]
fn acceptance_8_learning_machinery_and_desk_training() {
    // Analytic gradients against finite differences across representative
    // shapes, including the full-width default.
    let obs_dim = 31;
    for (shapes, probes) in [
        (vec![16usize], 0usize),
        (vec![48, 24], 0),
        (vec![64, 64, 64], 300),
        (vec![512, 256, 128], 200),
    ] {
        let mut rng = stream_rng(0xC8, shapes.len() as u64);
        let net = ActorCritic::new(obs_dim, 2, &shapes, -0.5, &mut rng);
        let worst = gradient_check(&net, probes, &mut rng);
        assert!(
            worst < 1e-4,
            "gradient check {worst} for hidden sizes {shapes:?}"
        );
    }

    // Advantage recursion against a hand-computed trace.
    let (adv, ret) = compute_gae(
        &[1.0, -0.5, 2.0],
        &[0.3, 0.1, -0.2],
        &[false, false, false],
        0.4,
        0.95,
        0.9,
    );
    let adv_gold = [2.0055944999999999, 1.4159000000000002, 2.58];
    let ret_gold = [2.3055945, 1.5159, 2.38];
    for i in 0..3 {
        assert!((adv[i] - adv_gold[i]).abs() < 1e-9, "adv[{i}]");
        assert!((ret[i] - ret_gold[i]).abs() < 1e-9, "ret[{i}]");
    }
    let (adv_done, _) = compute_gae(
        &[1.0, -0.5, 2.0],
        &[0.3, 0.1, -0.2],
        &[false, true, false],
        0.4,
        0.95,
        0.9,
    );
    let adv_done_gold = [0.28199999999999992, -0.6, 2.58];
    for i in 0..3 {
        assert!((adv_done[i] - adv_done_gold[i]).abs() < 1e-9, "done adv[{i}]");
    }

    // Small-map training run: the learned policy must clear the random
    // baseline with non-overlapping 95% confidence intervals.
    let mut cfg = SimConfig::default();
    cfg.env.width_cells = 8;
    cfg.env.height_cells = 8;
    cfg.env.n_uavs = 5;
    cfg.env.n_targets = 3;
    cfg.ppo.hidden_sizes = vec![64, 64, 64];
    cfg.validate().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let mut trainer = Trainer::new(&cfg, 8).unwrap();
    trainer.train(40, Some(dir.path())).unwrap();

    let mut registry = PolicyRegistry::builtin();
    registry
        .register_checkpoint("checkpoint", &dir.path().join("latest.json"))
        .unwrap();

    let returns = |policy: &str| {
        let out = evaluate(&cfg, &registry, policy, 100, 9090, 0, None).unwrap();
        let r: Vec<f64> = out.episodes.iter().map(|e| e.total_reward).collect();
        mean_and_se(&r)
    };
    let (mean_t, se_t) = returns("checkpoint");
    let (mean_r, se_r) = returns("random");
    println!(
        "  trained return {:.2} [{:.2}, {:.2}], random {:.2} [{:.2}, {:.2}]",
        mean_t,
        mean_t - 1.96 * se_t,
        mean_t + 1.96 * se_t,
        mean_r,
        mean_r - 1.96 * se_r,
        mean_r + 1.96 * se_r
    );
    assert!(
        mean_t - 1.96 * se_t > mean_r + 1.96 * se_r,
        "trained CI [{}, inf) overlaps random CI (-inf, {}]",
        mean_t - 1.96 * se_t,
        mean_r + 1.96 * se_r
    );
    println!("ACCEPTANCE 8 PASS: gradients, advantage oracle, and desk training all hold");
}

#[test]
fn acceptance_9_consensus_needs_enough_sensors() {
    // Two drones can never produce the three simultaneous hits consensus
    // requires, so every episode must time out.
    let mut cfg = SimConfig::default();
    cfg.env.n_uavs = 2;
    assert_eq!(cfg.env.theta_detect, 3);

    let registry = PolicyRegistry::builtin();
    for policy in ["random", "adaptive-pilot"] {
        let out = evaluate(&cfg, &registry, policy, 40, 77, 0, None).unwrap();
        assert_eq!(
            out.summary.success_rate, 0.0,
            "{policy} succeeded with fewer drones than the consensus threshold"
        );
    }
    println!("ACCEPTANCE 9 PASS: fleet below consensus threshold never succeeds");
}

// Reference flood: knowledge bit lands on every member of the holder's
// connected component.
fn bfs_component_or(
    knowledge: &KnowledgeMatrix,
    graph: &CommGraph,
    n: usize,
    n_targets: usize,
) -> KnowledgeMatrix {
    let mut out = KnowledgeMatrix::new(n, n_targets);
    let mut component = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if component[s] != usize::MAX {
            continue;
        }
        let id = next;
        next += 1;
        let mut queue = vec![s];
        component[s] = id;
        while let Some(i) = queue.pop() {
            for j in 0..n {
                if graph.adjacency[i][j] && component[j] == usize::MAX {
                    component[j] = id;
                    queue.push(j);
                }
            }
        }
    }
    for t in 0..n_targets {
        let mut component_knows = vec![false; next];
        for a in 0..n {
            if knowledge.get(a, t) {
                component_knows[component[a]] = true;
            }
        }
        for a in 0..n {
            if component_knows[component[a]] {
                out.set(a, t);
            }
        }
    }
    out
}

// Mirrors the environment's private shaping potential.
fn potential_oracle(world: &WorldState, cfg: &SimConfig) -> f64 {
    let undetected: Vec<Cell> = world
        .hotspots
        .iter()
        .filter(|h| h.detected_at.is_none())
        .map(|h| h.cell)
        .collect();
    if undetected.is_empty() {
        return 0.0;
    }
    let span = (world.grid.width_cells + world.grid.height_cells) as f64;
    let mean = world
        .uavs
        .iter()
        .map(|u| {
            undetected.iter().map(|&c| manhattan_cells(u.cell, c)).min().unwrap() as f64 / span
        })
        .sum::<f64>()
        / world.uavs.len() as f64;
    -cfg.reward.beta_distance * mean
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    entries.sort();
    entries
}
