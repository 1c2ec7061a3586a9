//! Grid-discretized Voronoi coverage: partition, Lloyd input and the
//! locational cost `H(x) = Σ_i ∫_{V_i} ‖q − x_i‖² φ(q) dq`.
//!
//! The domain is sampled at the centers of an `m × m` lattice of equal
//! cells. Each sample belongs to its nearest robot, ties going to the lower
//! index, and integrals become midpoint sums.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ControlError;
use crate::graph_topology::Configuration;

pub const MIN_RESOLUTION: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (self.min[0]..=self.max[0]).contains(&p[0]) && (self.min[1]..=self.max[1]).contains(&p[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub center: [f64; 2],
    /// Standard deviation of the isotropic bump.
    pub scale: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    /// `φ ≡ 1` on the domain.
    Uniform,
    GaussianMixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityField {
    pub domain: Rect,
    pub kind: Density,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<GaussianComponent>,
}

impl DensityField {
    pub fn uniform(domain: Rect) -> Self {
        Self {
            domain,
            kind: Density::Uniform,
            components: Vec::new(),
        }
    }

    pub fn gaussian_mixture(domain: Rect, components: Vec<GaussianComponent>) -> Self {
        Self {
            domain,
            kind: Density::GaussianMixture,
            components,
        }
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        let d = &self.domain;
        if !(d.width() > 0.0 && d.height() > 0.0) || d.min.iter().chain(&d.max).any(|v| !v.is_finite()) {
            return Err(ControlError::InvalidDensity("domain must be a non-empty finite rectangle".into()));
        }
        match self.kind {
            Density::Uniform if !self.components.is_empty() => Err(ControlError::InvalidDensity(
                "uniform density takes no components".into(),
            )),
            Density::GaussianMixture if self.components.is_empty() => Err(ControlError::InvalidDensity(
                "gaussian mixture needs at least one component".into(),
            )),
            _ => {
                for c in &self.components {
                    if !(c.scale > 0.0) || !(c.amplitude >= 0.0) || c.center.iter().any(|v| !v.is_finite()) {
                        return Err(ControlError::InvalidDensity(
                            "components need a positive scale and a non-negative amplitude".into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, q: [f64; 2]) -> f64 {
        match self.kind {
            Density::Uniform => 1.0,
            Density::GaussianMixture => self
                .components
                .iter()
                .map(|c| {
                    let dx = q[0] - c.center[0];
                    let dy = q[1] - c.center[1];
                    c.amplitude * (-(dx * dx + dy * dy) / (2.0 * c.scale * c.scale)).exp()
                })
                .sum(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VoronoiPartition {
    pub domain: Rect,
    pub resolution: usize,
    /// Owner of each lattice sample, row-major with `x` varying fastest.
    pub assignment: Vec<usize>,
    /// Density at each lattice sample.
    pub density: Vec<f64>,
    /// `∫_{V_i} φ` per robot.
    pub cell_mass: Vec<f64>,
    /// Density-weighted centroid per robot; the robot's own position for empty cells.
    pub centroids: Vec<[f64; 2]>,
    /// Area of one lattice cell.
    pub cell_area: f64,
}

impl VoronoiPartition {
    pub fn sample_point(&self, index: usize) -> [f64; 2] {
        sample_point(&self.domain, self.resolution, index)
    }

    pub fn total_mass(&self) -> f64 {
        self.cell_mass.iter().sum()
    }
}

fn sample_point(domain: &Rect, m: usize, index: usize) -> [f64; 2] {
    let (row, col) = (index / m, index % m);
    [
        domain.min[0] + (col as f64 + 0.5) * domain.width() / m as f64,
        domain.min[1] + (row as f64 + 0.5) * domain.height() / m as f64,
    ]
}

/// Nearest-robot assignment of the lattice without the non-zero-mass check.
pub fn grid_partition(
    config: &Configuration,
    density: &DensityField,
    resolution: usize,
) -> Result<VoronoiPartition, ControlError> {
    if config.dim() != 2 {
        return Err(ControlError::UnsupportedDimension(config.dim()));
    }
    if resolution < MIN_RESOLUTION {
        return Err(ControlError::Resolution {
            min: MIN_RESOLUTION,
            got: resolution,
        });
    }
    density.validate()?;

    let n = config.robot_count();
    let m = resolution;
    let domain = density.domain;
    let cell_area = domain.area() / (m * m) as f64;
    let mut assignment = Vec::with_capacity(m * m);
    let mut samples = Vec::with_capacity(m * m);
    let mut cell_mass = vec![0.0; n];
    let mut moment = vec![[0.0, 0.0]; n];

    for index in 0..m * m {
        let q = sample_point(&domain, m, index);
        let mut owner = 0;
        let mut best = f64::INFINITY;
        for i in 0..n {
            let x = config.position(i);
            let d2 = (q[0] - x[0]).powi(2) + (q[1] - x[1]).powi(2);
            if d2 < best {
                best = d2;
                owner = i;
            }
        }
        let phi = density.value(q);
        assignment.push(owner);
        samples.push(phi);
        cell_mass[owner] += phi * cell_area;
        moment[owner][0] += q[0] * phi * cell_area;
        moment[owner][1] += q[1] * phi * cell_area;
    }

    let centroids = (0..n)
        .map(|i| {
            if cell_mass[i] > 0.0 {
                [moment[i][0] / cell_mass[i], moment[i][1] / cell_mass[i]]
            } else {
                let x = config.position(i);
                [x[0], x[1]]
            }
        })
        .collect();

    Ok(VoronoiPartition {
        domain,
        resolution: m,
        assignment,
        density: samples,
        cell_mass,
        centroids,
        cell_area,
    })
}

pub fn voronoi_partition(
    config: &Configuration,
    density: &DensityField,
    resolution: usize,
) -> Result<VoronoiPartition, ControlError> {
    let partition = grid_partition(config, density, resolution)?;
    if !(partition.total_mass() > 0.0) {
        return Err(ControlError::DegenerateDensity);
    }
    Ok(partition)
}

/// `u_i = −k (x_i − c_i)`.
pub fn lloyd_input(config: &Configuration, partition: &VoronoiPartition, gain: f64) -> DVector<f64> {
    let n = config.robot_count();
    let mut u = DVector::zeros(2 * n);
    for i in 0..n {
        let x = config.position(i);
        let c = partition.centroids[i];
        u[2 * i] = -gain * (x[0] - c[0]);
        u[2 * i + 1] = -gain * (x[1] - c[1]);
    }
    u
}

/// Midpoint-rule locational cost over the partition's lattice.
pub fn locational_cost(config: &Configuration, partition: &VoronoiPartition) -> f64 {
    partition
        .assignment
        .iter()
        .zip(&partition.density)
        .enumerate()
        .map(|(index, (&owner, &phi))| {
            let q = partition.sample_point(index);
            let x = config.position(owner);
            ((q[0] - x[0]).powi(2) + (q[1] - x[1]).powi(2)) * phi * partition.cell_area
        })
        .sum()
}
