//! End-to-end simulation properties: consensus under the gain condition,
//! rate floors along live trajectories, agreement of the two integral
//! accumulator routes, and exactness of the standard protocol against its
//! closed form.

use conlab::analysis::{
    check_theorems, convergence_time, disagreement_decay_rate, standard_solution, ConsensusTime,
    RATE_BOUND_TOL,
};
use conlab::decomposition::{build_frame, SpectralFrame};
use conlab::dynamics::{default_horizon, simulate, Mode, ProtocolConfig};
use conlab::graph::{laplacian, load_topology, Topology};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn builtin(name: &str) -> Topology {
    let edges: Vec<(usize, usize)> = match name {
        "p2" => vec![(1, 2)],
        "path6" => vec![(1, 2), (2, 3), (3, 4), (4, 5), (5, 6)],
        "cycle6" => vec![(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)],
        "star6" => vec![(1, 2), (1, 3), (1, 4), (1, 5), (1, 6)],
        "complete6" => {
            let mut edges = Vec::new();
            for k in 1..=6usize {
                for j in (k + 1)..=6 {
                    edges.push((k, j));
                }
            }
            edges
        }
        "paper6" => vec![(1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1), (2, 5)],
        other => panic!("unknown topology {other}"),
    };
    let m = if name == "p2" { 2 } else { 6 };
    load_topology(m, &edges).unwrap()
}

fn frame_for(topology: &Topology) -> SpectralFrame {
    let l0 = laplacian(topology, &topology.unit_weights()).unwrap();
    build_frame(&l0).unwrap()
}

fn spread_x0(m: usize) -> Vec<f64> {
    let template = [1.0, 6.0, 8.0, 13.0, 15.0, 19.0];
    template.iter().copied().take(m).collect()
}

#[test]
fn adaptive_runs_settle_on_every_builtin_topology() {
    for name in ["p2", "path6", "cycle6", "star6", "complete6", "paper6"] {
        let topology = builtin(name);
        let frame = frame_for(&topology);
        let cfg = ProtocolConfig::new(2.0, 1.0, Mode::Adaptive).unwrap();
        let x0 = spread_x0(topology.node_count());
        let horizon = default_horizon(frame.lambda2(), &x0, 2.0, 1e-3);
        let traj = simulate(&topology, &x0, &cfg, horizon, 1e-3, 10).unwrap();
        match convergence_time(&traj, 1e-3) {
            ConsensusTime::Reached(t) => {
                assert!(t < horizon, "{name}: settle time {t} at horizon {horizon}")
            }
            ConsensusTime::NotReached => panic!("{name}: no consensus by t = {horizon}"),
        }
        assert!(traj.final_state().max_gap() < 1e-3);
    }
}

#[test]
fn live_decay_rate_never_drops_below_the_fixed_weight_floor() {
    let topology = builtin("paper6");
    let frame = frame_for(&topology);
    let cfg = ProtocolConfig::new(2.0, 1.0, Mode::Adaptive).unwrap();
    let x0 = spread_x0(6);
    let traj = simulate(&topology, &x0, &cfg, 4.0, 1e-3, 5).unwrap();

    let floor = 2.0 * cfg.alpha() * frame.lambda2();
    let mut evaluated = 0;
    for sample in traj.samples() {
        if let Some(rate) = disagreement_decay_rate(&topology, sample, &cfg) {
            assert!(
                rate >= floor - 1e-9,
                "rate {rate} under floor {floor} at t = {}",
                sample.time
            );
            evaluated += 1;
        }
    }
    assert!(evaluated > 100);
}

#[test]
fn accumulator_routes_stay_proportional() {
    for name in ["star6", "paper6"] {
        let topology = builtin(name);
        for mode in [Mode::Adaptive, Mode::Standard] {
            let cfg = ProtocolConfig::new(2.0, 0.7, mode).unwrap();
            let x0 = spread_x0(6);
            let traj = simulate(&topology, &x0, &cfg, 3.0, 1e-3, 10).unwrap();
            for sample in traj.samples() {
                let expected = 2.0 * cfg.zeta() * sample.disagreement_acc;
                assert!(
                    (sample.cost_acc - expected).abs() <= 1e-9 * (1.0 + sample.cost_acc),
                    "{name} {mode}: accumulators diverged at t = {}",
                    sample.time
                );
            }
        }
    }
}

#[test]
fn standard_runs_track_the_closed_form() {
    for name in ["cycle6", "paper6"] {
        let topology = builtin(name);
        let frame = frame_for(&topology);
        let cfg = ProtocolConfig::new(1.5, 0.75, Mode::Standard).unwrap();
        let x0 = spread_x0(6);
        let traj = simulate(&topology, &x0, &cfg, 3.0, 1e-3, 50).unwrap();
        for sample in traj.samples() {
            let exact = standard_solution(&frame, &x0, cfg.alpha(), sample.time).unwrap();
            for (k, value) in exact.iter().enumerate() {
                assert!(
                    (sample.x[k] - value).abs() <= 1e-7,
                    "{name}: drift from closed form at t = {}",
                    sample.time
                );
            }
        }
    }
}

#[test]
fn theorem_flags_hold_under_the_gain_condition() {
    for name in ["p2", "cycle6"] {
        let topology = builtin(name);
        let frame = frame_for(&topology);
        let cfg = ProtocolConfig::new(2.0, 1.0, Mode::Adaptive).unwrap();
        let x0 = spread_x0(topology.node_count());
        let horizon = 3.0 * default_horizon(frame.lambda2(), &x0, 2.0, 1e-3);
        let traj = simulate(&topology, &x0, &cfg, horizon, 1e-3, 10).unwrap();
        let report = check_theorems(&traj, &frame, 1e-3).unwrap();
        assert!(report.theorem1_holds, "{name}: theorem 1 flag");
        assert!(report.theorem2_holds, "{name}: theorem 2 flag");
        assert!(report.jr_star_plateaued, "{name}: plateau flag");
        assert!(report.jr_h_final < report.jr_star, "{name}: cost margin");
        let rho_min = report
            .rho_series
            .iter()
            .flatten()
            .fold(f64::INFINITY, |acc, r| acc.min(*r));
        assert!(
            rho_min >= report.rho_min_adaptive - RATE_BOUND_TOL,
            "{name}: rate floor"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// Any connected topology with any bounded start settles under the gain
    /// condition, conserving the mean and never shrinking a weight.
    #[test]
    fn prop_gain_condition_yields_consensus(m in 2usize..=6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for node in 1..m {
            let parent = rng.random_range(0..node);
            edges.push((parent + 1, node + 1));
        }
        for k in 0..m {
            for j in (k + 1)..m {
                if rng.random_bool(0.3) {
                    edges.push((k + 1, j + 1));
                }
            }
        }
        let topology = load_topology(m, &edges).unwrap();
        let frame = frame_for(&topology);
        let x0: Vec<f64> = (0..m).map(|_| rng.random_range(-5.0..5.0)).collect();

        let cfg = ProtocolConfig::new(2.0, 1.0, Mode::Adaptive).unwrap();
        let horizon = default_horizon(frame.lambda2(), &x0, 2.0, 1e-3).max(0.5);
        let traj = simulate(&topology, &x0, &cfg, horizon, 1e-3, 20).unwrap();

        prop_assert!(traj.final_state().max_gap() < 1e-3);
        let mean0 = traj.initial_state().mean();
        for pair in traj.samples().windows(2) {
            prop_assert!((pair[1].mean() - mean0).abs() <= 1e-9 * (1.0 + mean0.abs()));
            for idx in 0..topology.pair_count() {
                prop_assert!(pair[1].w[idx] >= pair[0].w[idx]);
            }
        }
    }
}
