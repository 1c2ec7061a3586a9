#![allow(dead_code)]

use std::path::PathBuf;

use conncbf::cli_io::parse_scenario;
use conncbf::graph_topology::{build_spectral_graph, Configuration, GraphParams};
use conncbf::simulator::ScenarioConfig;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn bundled(name: &str) -> ScenarioConfig {
    parse_scenario(&scenario_path(name)).expect("bundled scenario parses")
}

/// Connected components of the disk graph `d < R`, by union-find.
pub fn disk_components(config: &Configuration, radius: f64) -> usize {
    let n = config.robot_count();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if config.distance(i, j) < radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// Uniform points in a square of side `side`, at least `min_gap` apart.
pub fn scatter(rng: &mut ChaCha8Rng, n: usize, side: f64, min_gap: f64) -> Configuration {
    loop {
        let points: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.gen_range(0.0..side), rng.gen_range(0.0..side)])
            .collect();
        let config = Configuration::from_points(&points).unwrap();
        if n < 2 || config.min_pairwise_distance() >= min_gap {
            return config;
        }
    }
}

/// Random connected configuration whose second and third Laplacian
/// eigenvalues are separated by more than `min_gap`.
pub fn connected_config(rng: &mut ChaCha8Rng, n: usize, params: &GraphParams, min_gap: f64) -> Configuration {
    let side = params.comm_radius * (n as f64).sqrt() * 0.8;
    loop {
        let config = scatter(rng, n, side, 0.05 * params.comm_radius);
        if disk_components(&config, params.comm_radius) != 1 {
            continue;
        }
        let graph = build_spectral_graph(&config, params).unwrap();
        if graph.eigengap > min_gap && graph.lambda2 > 1e-6 {
            return config;
        }
    }
}

/// Two random clusters farther apart than the communication radius.
pub fn split_config(rng: &mut ChaCha8Rng, n: usize, params: &GraphParams) -> Configuration {
    let r = params.comm_radius;
    let left = rng.gen_range(1..n);
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let offset = if i < left { 0.0 } else { 3.0 * r };
        points.push([offset + rng.gen_range(0.0..r), rng.gen_range(0.0..r)]);
    }
    Configuration::from_points(&points).unwrap()
}

/// Exact projection of `target` onto `{u : A u ≥ b}` by enumerating every
/// candidate active set and keeping the feasible KKT point of least cost.
/// Exponential in the number of rows; only meant for small problems.
pub fn enumerate_projection(target: &DVector<f64>, rows: &[DVector<f64>], bounds: &[f64]) -> Option<DVector<f64>> {
    let m = rows.len();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let set: Vec<usize> = (0..m).filter(|k| mask & (1 << k) != 0).collect();
        let u = if set.is_empty() {
            target.clone()
        } else {
            let k = set.len();
            let a = DMatrix::from_fn(k, target.len(), |r, c| rows[set[r]][c]);
            let gram = &a * a.transpose();
            let rhs = DVector::from_iterator(k, set.iter().map(|&i| bounds[i] - rows[i].dot(target)));
            let Some(lu) = gram.clone().full_piv_lu().try_inverse() else {
                continue;
            };
            let mu = lu * rhs;
            if mu.iter().any(|&v| v < -1e-9) {
                continue;
            }
            target + a.transpose() * mu
        };
        let feasible = rows
            .iter()
            .zip(bounds)
            .all(|(a, &b)| a.dot(&u) >= b - 1e-9 * (1.0 + a.norm()));
        if !feasible {
            continue;
        }
        let cost = (&u - target).norm_squared();
        if best.as_ref().map_or(true, |(c, _)| cost < *c) {
            best = Some((cost, u));
        }
    }
    best.map(|(_, u)| u)
}

/// Random feasible constraint system: row entries are uniform, bounds are chosen
/// so that a random anchor point satisfies every row.
pub fn random_feasible_rows(rng: &mut ChaCha8Rng, dim: usize, m: usize) -> (Vec<DVector<f64>>, Vec<f64>, DVector<f64>) {
    let anchor = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
    let rows: Vec<DVector<f64>> = (0..m)
        .map(|_| DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let bounds = rows
        .iter()
        .map(|a| a.dot(&anchor) - rng.gen_range(0.0..1.0))
        .collect();
    (rows, bounds, anchor)
}
