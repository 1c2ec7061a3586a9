mod common;

use common::{connected_config, disk_components, rng, scatter, split_config};
use conncbf::graph_topology::{
    build_spectral_graph, connectivity_gradient, edge_weight, Configuration, GraphParams,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn central_difference(config: &Configuration, params: &GraphParams, h: f64) -> Vec<f64> {
    (0..config.state().len())
        .map(|c| {
            let plus = build_spectral_graph(&config.perturbed(c, h), params).unwrap().lambda2;
            let minus = build_spectral_graph(&config.perturbed(c, -h), params).unwrap().lambda2;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

#[test]
fn weight_matches_closed_form() {
    for &r in &[1.0, 2.5, 7.0] {
        let params = GraphParams::new(r);
        let sigma = r.powi(4) / std::f64::consts::LN_2;
        for k in 0..=40 {
            let d = 1.1 * r * k as f64 / 40.0;
            let expected = if d <= r { ((r * r - d * d).powi(2) / sigma).exp() - 1.0 } else { 0.0 };
            assert!((edge_weight(d, &params) - expected).abs() <= 1e-14, "R={r} d={d}");
        }
        assert!((edge_weight(0.0, &params) - 1.0).abs() < 1e-15);
    }
}

#[test]
fn gradient_matches_finite_differences_across_sizes() {
    let mut rng = rng(11);
    for n in 3..=12 {
        for &r in &[1.5, 4.0] {
            let params = GraphParams::new(r);
            let config = connected_config(&mut rng, n, &params, 1e-3);
            let graph = build_spectral_graph(&config, &params).unwrap();
            let beta = connectivity_gradient(&config, &graph, &params).unwrap();
            let fd = central_difference(&config, &params, 1e-6 * r);
            let err = relative_error(beta.as_vector().as_slice(), &fd);
            assert!(err < 1e-4, "n={n} R={r} relative error {err:e}");
            assert!(!beta.degenerate);
        }
    }
}

#[test]
fn fiedler_pair_solves_the_eigenproblem() {
    let mut rng = rng(12);
    let params = GraphParams::new(3.0);
    for n in 2..=9 {
        let config = connected_config(&mut rng, n, &params, 0.0);
        let g = build_spectral_graph(&config, &params).unwrap();
        let residual = (&g.laplacian * &g.fiedler - &g.fiedler * g.lambda2).norm();
        assert!(residual < 1e-10, "n={n} residual {residual:e}");
        assert!((g.fiedler.norm() - 1.0).abs() < 1e-12);
        assert!(g.fiedler.sum().abs() < 1e-10, "v2 is orthogonal to the ones vector");
        let first = g.fiedler.iter().find(|v| v.abs() > 1e-12).unwrap();
        assert!(*first > 0.0);
    }
}

#[test]
fn split_teams_have_zero_lambda2() {
    let mut rng = rng(13);
    let params = GraphParams::new(2.0);
    for n in 2..=8 {
        let config = split_config(&mut rng, n, &params);
        let g = build_spectral_graph(&config, &params).unwrap();
        assert!(g.lambda2 <= 1e-9, "lambda2 = {}", g.lambda2);
        assert!(!g.is_connected());
    }
}

fn rotate(config: &Configuration, angle: f64, shift: [f64; 2]) -> Configuration {
    let (s, c) = angle.sin_cos();
    let pts: Vec<[f64; 2]> = config
        .points()
        .iter()
        .map(|p| [c * p[0] - s * p[1] + shift[0], s * p[0] + c * p[1] + shift[1]])
        .collect();
    Configuration::from_points(&pts).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn laplacian_invariants(seed in any::<u64>(), n in 2usize..12, r in 0.5f64..6.0, split in any::<bool>()) {
        let mut rng = rng(seed);
        let params = GraphParams::new(r);
        let config = if split { split_config(&mut rng, n, &params) } else { scatter(&mut rng, n, r * 2.0, 1e-3) };
        let g = build_spectral_graph(&config, &params).unwrap();
        let l = &g.laplacian;

        prop_assert!((l - l.transpose()).amax() <= 1e-12);
        for i in 0..n {
            prop_assert!(l.row(i).sum().abs() <= 1e-10);
        }
        let min_eig = l.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= -1e-9);

        let connected = disk_components(&config, r) == 1;
        prop_assert_eq!(g.is_connected(), connected);
        if connected {
            prop_assert!(g.lambda2 > 1e-12, "connected but lambda2 = {}", g.lambda2);
        } else {
            prop_assert!(g.lambda2 <= 1e-9, "disconnected but lambda2 = {}", g.lambda2);
        }
        for w in g.eigenvalues.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
    }

    #[test]
    fn laplacian_matches_weight_sum_definition(seed in any::<u64>(), n in 2usize..10, r in 0.5f64..5.0) {
        let mut rng = rng(seed);
        let params = GraphParams::new(r);
        let config = scatter(&mut rng, n, 2.0 * r, 1e-3);
        let g = build_spectral_graph(&config, &params).unwrap();
        let mut expected = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let a = edge_weight(config.distance(i, j), &params);
                    expected[(i, j)] = -a;
                    expected[(i, i)] += a;
                }
            }
        }
        prop_assert!((&g.laplacian - expected).amax() <= 1e-13);
    }

    #[test]
    fn lambda2_is_invariant_under_rigid_motion(seed in any::<u64>(), n in 2usize..9, angle in -3.2f64..3.2, dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
        let mut rng = rng(seed);
        let params = GraphParams::new(2.0);
        let config = scatter(&mut rng, n, 4.0, 1e-3);
        let moved = rotate(&config, angle, [dx, dy]);
        let a = build_spectral_graph(&config, &params).unwrap().lambda2;
        let b = build_spectral_graph(&moved, &params).unwrap().lambda2;
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a));
    }

    #[test]
    fn gradient_is_blind_to_translation_and_rotation(seed in any::<u64>(), n in 3usize..9) {
        let mut rng = rng(seed);
        let params = GraphParams::new(2.0);
        let config = connected_config(&mut rng, n, &params, 1e-6);
        let g = build_spectral_graph(&config, &params).unwrap();
        let beta = connectivity_gradient(&config, &g, &params).unwrap();
        // λ₂ is unchanged by rigid motions, so β has no net force and no net torque.
        let (mut fx, mut fy, mut torque) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let b = beta.block(i);
            let x = config.position(i);
            fx += b[0];
            fy += b[1];
            torque += x[0] * b[1] - x[1] * b[0];
        }
        let scale = beta.max_block_norm().max(1e-12) * n as f64;
        prop_assert!(fx.abs() <= 1e-10 * scale && fy.abs() <= 1e-10 * scale);
        prop_assert!(torque.abs() <= 1e-9 * scale * (1.0 + 4.0 * n as f64));
    }

    #[test]
    fn weight_is_nonincreasing_in_distance(r in 0.1f64..10.0, a in 0.0f64..1.2, b in 0.0f64..1.2) {
        let params = GraphParams::new(r);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(edge_weight(lo * r, &params) >= edge_weight(hi * r, &params));
        prop_assert!(edge_weight(hi * r, &params) >= 0.0);
    }
}
