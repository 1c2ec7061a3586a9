mod common;

use common::bundled;
use conncbf::cbf_qp::{clf_value, solve_cbf_qp, CbfParams};
use conncbf::cli_io::metrics_csv;
use conncbf::graph_topology::{build_spectral_graph, Configuration, GraphParams};
use conncbf::simulator::{
    run_scenario, ConstraintFlags, ControllerSpec, InitialPlacement, ScenarioConfig, SimError, Simulator, SpawnRegion,
};

fn with_dt(mut s: ScenarioConfig, dt: f64, horizon: f64) -> ScenarioConfig {
    s.dt = dt;
    s.horizon = horizon;
    s
}

fn euler_probe(dt: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: "euler".into(),
        robots: 4,
        dim: 2,
        initial: InitialPlacement::Explicit(vec![vec![4.0, 4.2], vec![5.2, 4.0], vec![4.1, 5.3], vec![5.4, 5.6]]),
        graph: GraphParams::new(4.0),
        cbf: CbfParams::new(0.1, 1.0),
        constraints: ConstraintFlags {
            connectivity: false,
            safety: false,
            local_link: false,
        },
        controller: ControllerSpec::Consensus { gain: 1.0 },
        dt,
        horizon: 1.0,
    }
}

#[test]
fn filtered_consensus_stays_connected_at_two_step_sizes() {
    for (dt, horizon) in [(0.01, 20.0), (0.005, 10.0)] {
        let s = with_dt(bundled("consensus_bridge.toml"), dt, horizon);
        let log = run_scenario(&s).unwrap();
        assert!(log.min_lambda2() >= 0.08, "dt={dt}: min lambda2 {}", log.min_lambda2());
        assert!(log.min_distance() >= 1.45, "dt={dt}: min distance {}", log.min_distance());
    }
}

#[test]
fn unfiltered_consensus_splits_the_bridge() {
    let mut s = bundled("consensus_bridge.toml");
    s.constraints.connectivity = false;
    let log = run_scenario(&s).unwrap();
    assert!(log.last().lambda2 < 0.01);
}

#[test]
fn clf_never_increases_while_recovering() {
    let s = bundled("radial_n4.toml");
    let eps = s.cbf.epsilon;
    let log = run_scenario(&s).unwrap();
    let v: Vec<f64> = log.records.iter().map(|r| clf_value(r.lambda2, eps).unwrap()).collect();
    let reach = v.iter().position(|&x| x <= 1e-3).expect("recovers");
    assert!(reach > 0, "starts below epsilon");
    for k in 0..reach {
        assert!(v[k + 1] < v[k], "step {k}: {} -> {}", v[k], v[k + 1]);
    }
    assert!(log.records[reach..].iter().all(|r| r.lambda2 >= 0.08));
}

#[test]
fn runs_are_bit_identical() {
    let s = bundled("coverage_n4.toml");
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(metrics_csv(&a).unwrap(), metrics_csv(&b).unwrap());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.positions, y.positions);
        assert_eq!(x.lambda2.to_bits(), y.lambda2.to_bits());
    }
}

#[test]
fn spawned_runs_depend_only_on_the_seed() {
    let mut s = bundled("radial_n4.toml");
    s.horizon = 1.0;
    s.initial = InitialPlacement::Spawn(SpawnRegion {
        seed: 7,
        min: vec![0.0, 0.0],
        max: vec![4.0, 4.0],
        max_attempts: 1000,
    });
    let a = run_scenario(&s).unwrap();
    let b = run_scenario(&s).unwrap();
    assert_eq!(a.records[0].positions, b.records[0].positions);
    assert_eq!(a.last().positions, b.last().positions);

    if let InitialPlacement::Spawn(region) = &mut s.initial {
        region.seed = 8;
    }
    let c = run_scenario(&s).unwrap();
    assert_ne!(a.records[0].positions, c.records[0].positions);
}

#[test]
fn euler_refinement_is_first_order() {
    let finals: Vec<f64> = [0.01, 0.005, 0.0025]
        .iter()
        .map(|&dt| run_scenario(&euler_probe(dt)).unwrap().last().lambda2)
        .collect();
    let ratio = (finals[0] - finals[1]) / (finals[1] - finals[2]);
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio} from {finals:?}");
}

#[test]
fn steps_apply_the_halfspace_projection() {
    // With only the connectivity row present, the filtered velocity is the
    // closed-form projection of the desired one onto β·u ≥ −φ(λ₂ − ε).
    let mut s = bundled("coverage_n4.toml");
    s.constraints.safety = false;
    let (sim, mut x) = Simulator::new(s.clone()).unwrap();
    let mut binding = 0;
    for k in 0..s.step_count() {
        let (next, record) = sim.step(&x, k).unwrap();
        let control = record.control.as_ref().unwrap();
        let graph = build_spectral_graph(&x, &s.graph).unwrap();
        let rows = sim.constraints(&x, &graph, k).unwrap();
        assert_eq!(rows.len(), 1);
        let a = &rows[0].coefficients;
        let shortfall = (rows[0].bound - a.dot(&control.u_des)).max(0.0);
        let expected = &control.u_des + a * (shortfall / a.norm_squared());
        assert!((&control.u - &expected).amax() < 1e-9, "step {k}");
        assert!((next.state() - x.advanced(&expected, s.dt).state()).amax() < 1e-9);
        if shortfall > 0.0 {
            binding += 1;
        }
        x = next;
    }
    assert!(binding > 100, "the barrier binds for only {binding} steps");
}

#[test]
fn final_record_carries_no_control_and_times_are_uniform() {
    let mut s = bundled("radial_n4.toml");
    s.horizon = 0.5;
    let log = run_scenario(&s).unwrap();
    assert_eq!(log.records.len(), s.step_count() + 1);
    assert!(log.last().control.is_none());
    for (k, r) in log.records.iter().enumerate() {
        assert_eq!(r.step, k);
        assert!((r.time - k as f64 * s.dt).abs() < 1e-12);
        if k + 1 < log.records.len() {
            assert!(r.control.is_some());
        }
    }
}

#[test]
fn disconnected_start_is_rejected_before_running() {
    let mut s = bundled("radial_n4.toml");
    s.initial = InitialPlacement::Explicit(vec![vec![0.0, 0.0], vec![1.6, 0.0], vec![20.0, 0.0], vec![21.6, 0.0]]);
    let err = run_scenario(&s).unwrap_err();
    assert!(err.log.is_none());
    assert!(matches!(err.error, SimError::InitiallyDisconnected { .. }));
    assert!(err.error.is_validation());
}

#[test]
fn filter_is_minimally_invasive_inside_the_safe_set() {
    // Well inside every barrier the QP must return the desired input untouched.
    // Radial directions for three robots are up, left and down; this
    // placement makes every pair separate.
    let x = Configuration::from_points(&[[1.0, 1.7], [0.0, 0.0], [2.0, 0.0]]).unwrap();
    let mut s = bundled("radial_n4.toml");
    s.robots = 3;
    s.initial = InitialPlacement::Explicit(x.points());
    let (sim, x0) = Simulator::new(s).unwrap();
    let (_, record) = sim.step(&x0, 0).unwrap();
    let c = record.control.unwrap();
    assert!(c.active_set.is_empty());
    assert_eq!(c.u, c.u_des);
    let graph = build_spectral_graph(&x0, &sim.scenario().graph).unwrap();
    let rows = sim.constraints(&x0, &graph, 0).unwrap();
    assert_eq!(solve_cbf_qp(&c.u_des, &rows).unwrap().deformation, 0.0);
}
