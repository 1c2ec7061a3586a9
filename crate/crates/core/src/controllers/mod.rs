//! Desired (pre-filter) controllers.

mod coverage;

use std::f64::consts::PI;

use nalgebra::DVector;
use thiserror::Error;

use crate::graph_topology::{Configuration, SpectralGraph};

pub use coverage::{
    grid_partition, lloyd_input, locational_cost, voronoi_partition, Density, DensityField, GaussianComponent,
    Rect, VoronoiPartition, MIN_RESOLUTION,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("controller requires a planar workspace, got dimension {0}")]
    UnsupportedDimension(usize),

    #[error("robot index {index} outside 1..={count}")]
    RobotIndex { index: usize, count: usize },

    #[error("grid resolution must be at least {min}, got {got}")]
    Resolution { min: usize, got: usize },

    #[error("density integrates to zero over the domain")]
    DegenerateDensity,

    #[error("invalid density field: {0}")]
    InvalidDensity(String),
}

/// Weighted Laplacian flow `u = −k (L ⊗ I_n) x`.
pub fn consensus_input(config: &Configuration, graph: &SpectralGraph, gain: f64) -> DVector<f64> {
    let n = config.robot_count();
    let dim = config.dim();
    let mut u = DVector::zeros(n * dim);
    for i in 0..n {
        for j in i + 1..n {
            let a = graph.weights[(i, j)];
            if a == 0.0 {
                continue;
            }
            let (xi, xj) = (config.position(i), config.position(j));
            for c in 0..dim {
                let pull = gain * a * (xi[c] - xj[c]);
                u[i * dim + c] -= pull;
                u[j * dim + c] += pull;
            }
        }
    }
    u
}

/// Constant outward velocity of robot `index` (1-based):
/// `k·(cos(2πi/(N+1)), sin(2πi/(N+1)))`.
pub fn radial_disconnecting_input(index: usize, count: usize, gain: f64, dim: usize) -> Result<[f64; 2], ControlError> {
    if dim != 2 {
        return Err(ControlError::UnsupportedDimension(dim));
    }
    if index == 0 || index > count {
        return Err(ControlError::RobotIndex { index, count });
    }
    let angle = 2.0 * PI * index as f64 / (count as f64 + 1.0);
    Ok([gain * angle.cos(), gain * angle.sin()])
}

/// Stacked radial inputs for every robot in `config`.
pub fn radial_input(config: &Configuration, gain: f64) -> Result<DVector<f64>, ControlError> {
    let n = config.robot_count();
    let mut u = DVector::zeros(n * config.dim());
    for i in 0..n {
        let v = radial_disconnecting_input(i + 1, n, gain, config.dim())?;
        u[2 * i] = v[0];
        u[2 * i + 1] = v[1];
    }
    Ok(u)
}
