//! Acceptance suite: one test per criterion, each printing a PASS line with
//! its measured quantity. Criteria 4-6 share the same set of training runs
//! and live in a single test. Run with:
//!
//! ```text
//! cargo test -p drlsl --test acceptance -- --nocapture --test-threads=1
//! ```

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use drlsl::config::{AgentKind, RunConfig};
use drlsl::run::{convergence_episode, test_seed, train_seed, write_metrics, TestSummary};
use highway::control::{simulate_following, ControlConfig};
use highway::env::{compute_reward, RewardConfig, StepEvents};
use highway::nn::{q_loss_and_grads, Mlp};
use highway::shield::{run_audit, Shield, ShieldConfig};
use highway::types::{Direction, TrackConfig};
use logic::testkit::{check_program_against_oracle, random_program, TestRng};

// ---------------------------------------------------------------------------
// Criterion 1: analytic gradients match central finite differences on 20
// random (net, batch) instances, relative error < 1e-4, in < 10 s.
// ---------------------------------------------------------------------------

fn finite_difference_worst_error(seed: u64) -> f64 {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let hidden_a = 4 + (seed % 4) as usize;
    let hidden_b = 3 + (seed % 3) as usize;
    let mut net = Mlp::new(&[6, hidden_a, hidden_b, 3], &mut rng);
    let batch = 3 + (seed % 4) as usize;
    let inputs: Vec<Vec<f64>> = (0..batch)
        .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let actions: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..3)).collect();
    let targets: Vec<f64> = (0..batch).map(|_| rng.gen_range(-3.0..3.0)).collect();

    let (_, analytic) = q_loss_and_grads(&net, &inputs, &actions, &targets);
    let mut worst: f64 = 0.0;
    for layer in 0..net.layers.len() {
        let n_weights = net.layers[layer].weights.len();
        let n_params = n_weights + net.layers[layer].biases.len();
        for p in 0..n_params {
            let get = |net: &Mlp| {
                if p < n_weights {
                    net.layers[layer].weights[p]
                } else {
                    net.layers[layer].biases[p - n_weights]
                }
            };
            let set = |net: &mut Mlp, v: f64| {
                if p < n_weights {
                    net.layers[layer].weights[p] = v;
                } else {
                    net.layers[layer].biases[p - n_weights] = v;
                }
            };
            let original = get(&net);
            let h = 1e-5 * original.abs().max(1.0);
            set(&mut net, original + h);
            let (plus, _) = q_loss_and_grads(&net, &inputs, &actions, &targets);
            set(&mut net, original - h);
            let (minus, _) = q_loss_and_grads(&net, &inputs, &actions, &targets);
            set(&mut net, original);
            let numeric = (plus - minus) / (2.0 * h);
            let reference = if p < n_weights {
                analytic.layers[layer].0[p]
            } else {
                analytic.layers[layer].1[p - n_weights]
            };
            let denom = (numeric.abs() + reference.abs()).max(1e-6);
            worst = worst.max((numeric - reference).abs() / denom);
        }
    }
    worst
}

#[test]
fn criterion_1_gradient_oracle() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        worst = worst.max(finite_difference_worst_error(seed));
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(worst < 1e-4, "worst relative gradient error {worst:e}");
    assert!(elapsed < 10.0, "gradient oracle took {elapsed:.1} s");
    println!(
        "criterion 1 (gradient oracle): PASS - worst relative error {worst:.2e} over 20 instances in {elapsed:.2} s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 2: solve/find_all equal exhaustive ground enumeration on 500
// random function-free programs in < 30 s.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_logic_engine_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = TestRng::new(0xACCE97);
    for i in 0..500 {
        let program = random_program(&mut rng);
        if let Err(msg) = check_program_against_oracle(&program) {
            panic!("program {i}: {msg}");
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "logic oracle took {elapsed:.1} s");
    println!(
        "criterion 2 (logic oracle equivalence): PASS - 500 random programs agree in {elapsed:.2} s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 3: 100% agreement between rule-engine safe sets and the
// geometric reference over the exhaustive micro-scene grid (>= 200 scenes)
// in < 5 s.
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_shield_audit() {
    let start = Instant::now();
    let track = TrackConfig::default();
    let shield = Shield::with_default_rules(ShieldConfig::default(), track.clone()).unwrap();
    let report = run_audit(&shield, &track).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(report.scenes >= 200, "only {} scenes", report.scenes);
    for m in report.mismatches.iter().take(5) {
        eprintln!("mismatch {}: {:?} vs {:?}", m.description, m.from_rules, m.from_geometry);
    }
    assert_eq!(report.agreements, report.scenes, "audit disagreement");
    assert!(elapsed < 5.0, "audit took {elapsed:.1} s");
    println!(
        "criterion 3 (shield audit): PASS - {}/{} scenes agree in {elapsed:.2} s",
        report.agreements, report.scenes
    );
}

// ---------------------------------------------------------------------------
// Criteria 4-6 share one set of desk-scale training runs: 300 episodes,
// synthetic traffic in the three same-direction lanes, seeds {1, 2, 3}.
// ---------------------------------------------------------------------------

/// Desk-scale profile shared by every training criterion: 300 episodes,
/// moderate synthetic traffic in the three same-direction lanes, seeds
/// {1, 2, 3}, a 64x64 network, and schedules bottoming out at episode 100.
/// Mirrors configs/desk.json.
fn desk_config(agent: AgentKind) -> RunConfig {
    let mut cfg = RunConfig {
        agent,
        shield_on: agent == AgentKind::Dqnsl,
        episodes: 300,
        seeds: vec![1, 2, 3],
        ..RunConfig::default()
    };
    cfg.hyper.hidden = vec![64, 64];
    cfg.hyper.batch_size = 64;
    cfg.hyper.train_every = 2;
    cfg.hyper.buffer_capacity = 20_000;
    cfg.hyper.schedule_horizon = Some(100);
    cfg.synth.lane_rates_per_min = [0.0, 0.0, 0.0, 12.0, 12.0, 12.0];
    cfg
}

struct AgentRuns {
    ego_caused_collisions: u64,
    off_road: u64,
    convergence: Vec<usize>,
    checkpoints: Vec<highway::checkpoint::Checkpoint>,
}

fn train_agent(agent: AgentKind) -> AgentRuns {
    let cfg = desk_config(agent);
    let mut out = AgentRuns {
        ego_caused_collisions: 0,
        off_road: 0,
        convergence: Vec::new(),
        checkpoints: Vec::new(),
    };
    for &seed in &cfg.seeds {
        let run = train_seed(&cfg, seed, None).expect("training run failed");
        out.ego_caused_collisions +=
            run.metrics.iter().filter(|m| m.collision && m.ego_caused).count() as u64;
        out.off_road += run.metrics.iter().filter(|m| m.off_road).count() as u64;
        let rewards: Vec<f64> = run.metrics.iter().map(|m| m.reward).collect();
        out.convergence.push(convergence_episode(&rewards, 50));
        out.checkpoints.push(run.checkpoint);
        assert!(run.metrics.iter().all(|m| m.safe_violations == 0));
    }
    out
}

fn median(mut values: Vec<usize>) -> usize {
    values.sort_unstable();
    values[values.len() / 2]
}

#[test]
fn criteria_4_5_6_training_and_test_protocol() {
    let start = Instant::now();
    let dqnsl = train_agent(AgentKind::Dqnsl);
    let dqn = train_agent(AgentKind::Dqn);
    let train_elapsed = start.elapsed().as_secs_f64();

    // Criterion 4: training safety.
    assert_eq!(
        dqnsl.ego_caused_collisions, 0,
        "shielded training recorded ego-caused collisions"
    );
    assert_eq!(dqnsl.off_road, 0, "shielded training left the road");
    assert!(
        dqn.ego_caused_collisions >= 1,
        "baseline recorded no ego-caused collision; traffic too thin to separate the agents"
    );
    assert!(dqn.off_road >= 1, "baseline never left the road");
    println!(
        "criterion 4 (training safety): PASS - shielded: 0 ego-caused / 0 off-road; baseline: {} ego-caused / {} off-road over 3 seeds x 300 episodes ({:.0} s)",
        dqn.ego_caused_collisions, dqn.off_road, train_elapsed
    );

    // Criterion 5: convergence ordering, median over seeds.
    let dqnsl_conv = median(dqnsl.convergence.clone());
    let dqn_conv = median(dqn.convergence.clone());
    assert!(
        (dqnsl_conv as f64) <= 0.8 * dqn_conv as f64,
        "convergence ordering failed: shielded {dqnsl_conv} vs baseline {dqn_conv} \
         (shielded per-seed {:?}, baseline per-seed {:?})",
        dqnsl.convergence,
        dqn.convergence
    );
    println!(
        "criterion 5 (convergence ordering): PASS - median convergence episode shielded {dqnsl_conv} vs baseline {dqn_conv} (ratio {:.2})",
        dqnsl_conv as f64 / dqn_conv as f64
    );

    // Criterion 6: shield-off test protocol in both table directions, 50
    // episodes per seed per direction, totals across seeds.
    let test_start = Instant::now();
    let test_cfg_l2r = RunConfig { shield_on: false, ..desk_config(AgentKind::Dqn) };
    let test_cfg_r2l =
        RunConfig { direction: Direction::RightToLeft, ..test_cfg_l2r.clone() };
    let mut totals = std::collections::BTreeMap::new();
    let mut dqnsl_mirrored_off_road = 0;
    for (name, runs) in [("dqnsl", &dqnsl), ("dqn", &dqn)] {
        let mut summaries = Vec::new();
        for (i, &seed) in test_cfg_l2r.seeds.iter().enumerate() {
            let (forward, _) = test_seed(&test_cfg_l2r, &runs.checkpoints[i], seed).unwrap();
            let (mirrored, _) = test_seed(&test_cfg_r2l, &runs.checkpoints[i], seed).unwrap();
            if name == "dqnsl" {
                dqnsl_mirrored_off_road += mirrored.off_road;
            }
            summaries.push(forward);
            summaries.push(mirrored);
        }
        totals.insert(name, TestSummary::merge(&summaries));
    }
    let s_dqnsl = totals["dqnsl"];
    let s_dqn = totals["dqn"];
    assert!(
        s_dqnsl.lane_changes < s_dqn.lane_changes,
        "lane-change ordering failed: shielded {} vs baseline {}",
        s_dqnsl.lane_changes,
        s_dqn.lane_changes
    );
    assert!(
        s_dqnsl.collisions <= s_dqn.collisions,
        "collision ordering failed: shielded {} vs baseline {}",
        s_dqnsl.collisions,
        s_dqn.collisions
    );
    let test_elapsed = test_start.elapsed().as_secs_f64();
    assert_eq!(
        dqnsl_mirrored_off_road, 0,
        "shielded policy left the road in the mirrored test"
    );
    assert!(test_elapsed < 300.0, "test protocol took {test_elapsed:.0} s");
    println!(
        "criterion 6 (test-phase ordering): PASS - lane changes shielded {} < baseline {}; collisions {} <= {}; mirrored off-road 0 ({:.0} s)",
        s_dqnsl.lane_changes, s_dqn.lane_changes, s_dqnsl.collisions, s_dqn.collisions, test_elapsed
    );
}

// ---------------------------------------------------------------------------
// Criterion 7: reward arithmetic fixtures, exact to 1e-12.
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_reward_arithmetic() {
    let cfg = RewardConfig::default();
    assert_eq!(cfg.w_lane_change, 5.0);
    assert_eq!(cfg.w_velocity, 0.01);
    assert_eq!(cfg.w_collision, 100.0);
    assert_eq!(cfg.w_off_road, 100.0);

    let track_length = 840.0;
    let case = |events: StepEvents, speed: f64| compute_reward(&cfg, &events, speed, 33.3, track_length);

    // Plain driving at 25 m/s.
    let (reward, parts) = case(
        StepEvents { lane_change_decision: false, collision: false, off_road: false, progress: 100.0 },
        25.0,
    );
    assert!((parts.velocity - 25.0).abs() < 1e-12);
    assert!((reward - 0.25).abs() < 1e-12);

    // Lane-change decision at 25 m/s.
    let (reward, _) = case(
        StepEvents { lane_change_decision: true, collision: false, off_road: false, progress: 100.0 },
        25.0,
    );
    assert!((reward - (-4.75)).abs() < 1e-12);

    // Collision at progress 0: component exactly -1, contribution -100.
    let (reward, parts) = case(
        StepEvents { lane_change_decision: false, collision: true, off_road: false, progress: 0.0 },
        0.0,
    );
    assert!((parts.collision - (-1.0)).abs() < 1e-12);
    assert!((reward - (-100.0)).abs() < 1e-12);

    // Collision at half track: -(1 - 0.4) = -0.6.
    let (_, parts) = case(
        StepEvents { lane_change_decision: false, collision: true, off_road: false, progress: 420.0 },
        0.0,
    );
    assert!((parts.collision - (-0.6)).abs() < 1e-12);

    // Off-road at the end of the track: -0.2.
    let (_, parts) = case(
        StepEvents { lane_change_decision: false, collision: false, off_road: true, progress: 840.0 },
        0.0,
    );
    assert!((parts.off_road - (-0.2)).abs() < 1e-12);

    // Decomposition: reward equals the weighted component sum exactly.
    let (reward, parts) = case(
        StepEvents { lane_change_decision: true, collision: true, off_road: false, progress: 300.0 },
        17.3,
    );
    let reconstructed = 5.0 * parts.lane_change
        + 0.01 * parts.velocity
        + 100.0 * parts.collision
        + 100.0 * parts.off_road;
    assert!((reward - reconstructed).abs() < 1e-12);

    println!("criterion 7 (reward arithmetic): PASS - weights (5, 0.01, 100, 100), terminal fixtures exact to 1e-12");
}

// ---------------------------------------------------------------------------
// Criterion 8: 1-D following sweep never produces overlap, < 10 s.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_controller_safety_sweep() {
    let start = Instant::now();
    let cfg = ControlConfig::default();
    let mut cases = 0u64;
    let mut tightest = f64::INFINITY;
    for ego_v0_steps in 1..=5 {
        let ego_v0 = 5.0 * ego_v0_steps as f64; // 5..=25 m/s
        for leader_steps in 0..=7 {
            let leader = 5.0 * leader_steps as f64; // 0..=35 m/s
            let critical = cfg.critical_distance(ego_v0);
            let mut gap = critical + 5.0;
            while gap <= 150.0 {
                let min_gap = simulate_following(&cfg, ego_v0, leader, gap, 33.3, 0.04, 60.0);
                assert!(
                    min_gap > 0.0,
                    "overlap at ego_v0={ego_v0}, leader={leader}, gap0={gap}: min {min_gap:.3}"
                );
                tightest = tightest.min(min_gap);
                cases += 1;
                gap += 5.0;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "controller sweep took {elapsed:.1} s");
    println!(
        "criterion 8 (controller safety sweep): PASS - {cases} scenarios, tightest gap {tightest:.2} m, in {elapsed:.2} s"
    );
}

// ---------------------------------------------------------------------------
// Criterion 9: byte-identical metrics under identical (seed, config);
// checkpoint save/load/save byte-identical.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_determinism_and_persistence() {
    let mut cfg = desk_config(AgentKind::Dqnsl);
    cfg.episodes = 5;
    cfg.seeds = vec![7];

    let dir = std::env::temp_dir().join("drlsl_acceptance_determinism");
    std::fs::create_dir_all(&dir).unwrap();

    let run_a = train_seed(&cfg, 7, None).unwrap();
    let run_b = train_seed(&cfg, 7, None).unwrap();

    let path_a = dir.join("metrics_a.csv");
    let path_b = dir.join("metrics_b.csv");
    write_metrics(&path_a, &run_a.metrics).unwrap();
    write_metrics(&path_b, &run_b.metrics).unwrap();
    let bytes_a = std::fs::read(&path_a).unwrap();
    let bytes_b = std::fs::read(&path_b).unwrap();
    assert_eq!(bytes_a, bytes_b, "metrics differ across identical runs");

    let encoded = highway::checkpoint::encode(&run_a.checkpoint);
    let encoded_b = highway::checkpoint::encode(&run_b.checkpoint);
    assert_eq!(encoded, encoded_b, "checkpoints differ across identical runs");

    // save -> load -> save through the filesystem.
    let cp_path = dir.join("checkpoint.bin");
    highway::checkpoint::save(&run_a.checkpoint, &cp_path).unwrap();
    let reloaded = highway::checkpoint::load(&cp_path).unwrap();
    let cp_path2 = dir.join("checkpoint2.bin");
    highway::checkpoint::save(&reloaded, &cp_path2).unwrap();
    assert_eq!(
        std::fs::read(&cp_path).unwrap(),
        std::fs::read(&cp_path2).unwrap(),
        "checkpoint save/load/save not byte-identical"
    );

    println!(
        "criterion 9 (determinism and persistence): PASS - {} metric bytes identical; checkpoint round-trip identical ({} bytes)",
        bytes_a.len(),
        encoded.len()
    );
}
