//! Weighted proximity graph over robot positions and the spectral quantities
//! derived from it: the algebraic connectivity `λ₂`, its Fiedler vector and
//! the analytic gradient `∂λ₂/∂x`.
//!
//! Edge weights follow a smooth bump supported on the communication disk:
//!
//! ```text
//! a(d) = exp((R² − d²)² / σ) − 1   if d ≤ R
//!      = 0                         otherwise
//! ```
//!
//! The default `σ = R⁴ / ln 2` makes `a(0) = 1`, the largest weight.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Eigengap below which the Fiedler pair is treated as degenerate.
pub const DEFAULT_EIGENGAP_THRESHOLD: f64 = 1e-6;

/// Negative eigenvalues down to this magnitude are rounding noise on a PSD matrix.
const PSD_TOLERANCE: f64 = 1e-9;

const EIGEN_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("workspace dimension must be 1, 2 or 3, got {0}")]
    UnsupportedDimension(usize),

    #[error("state length {len} is not a multiple of dimension {dim}")]
    RaggedState { len: usize, dim: usize },

    #[error("at least {required} robots are required, got {got}")]
    TooFewRobots { required: usize, got: usize },

    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },

    #[error("robots {0} and {1} occupy the same position")]
    CoincidentRobots(usize, usize),

    #[error("distance must be strictly positive for the weight derivative, got {0}")]
    ZeroDistance(f64),

    #[error("communication radius and sigma must be positive (R = {radius}, sigma = {sigma})")]
    InvalidParams { radius: f64, sigma: f64 },

    #[error("weight matrix must be square, symmetric and non-negative")]
    InvalidWeights,

    #[error("eigensolver failed: {0}")]
    Numerical(String),
}

/// Stacked robot positions `x = [x_1ᵀ, …, x_Nᵀ]ᵀ ∈ ℝ^{nN}`.
///
/// A configuration only checks shape and finiteness. Distinctness of
/// positions is checked where it matters, when the graph is built.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    dim: usize,
    state: DVector<f64>,
}

impl Configuration {
    pub fn new(dim: usize, state: Vec<f64>) -> Result<Self, GraphError> {
        if !(1..=3).contains(&dim) {
            return Err(GraphError::UnsupportedDimension(dim));
        }
        if state.len() % dim != 0 {
            return Err(GraphError::RaggedState {
                len: state.len(),
                dim,
            });
        }
        if state.is_empty() {
            return Err(GraphError::TooFewRobots {
                required: 1,
                got: 0,
            });
        }
        if let Some(index) = state.iter().position(|v| !v.is_finite()) {
            return Err(GraphError::NonFinite { index });
        }
        Ok(Self {
            dim,
            state: DVector::from_vec(state),
        })
    }

    /// Builds a configuration from per-robot points; all points must share a dimension.
    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self, GraphError> {
        let dim = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
        let mut state = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(GraphError::RaggedState {
                    len: p.len(),
                    dim,
                });
            }
            state.extend_from_slice(p);
        }
        if dim == 0 {
            return Err(GraphError::UnsupportedDimension(0));
        }
        Self::new(dim, state)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn robot_count(&self) -> usize {
        self.state.len() / self.dim
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn position(&self, i: usize) -> &[f64] {
        &self.state.as_slice()[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.robot_count())
            .map(|i| self.position(i).to_vec())
            .collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.position(i)
            .iter()
            .zip(self.position(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest pairwise distance, `+∞` for a single robot.
    pub fn min_pairwise_distance(&self) -> f64 {
        let n = self.robot_count();
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                best = best.min(self.distance(i, j));
            }
        }
        best
    }

    /// Explicit Euler update `x + dt·u`.
    pub fn advanced(&self, velocity: &DVector<f64>, dt: f64) -> Self {
        assert_eq!(velocity.len(), self.state.len(), "velocity length mismatch");
        Self {
            dim: self.dim,
            state: &self.state + velocity * dt,
        }
    }

    /// Copy with one coordinate shifted; used by finite-difference checks.
    pub fn perturbed(&self, coordinate: usize, delta: f64) -> Self {
        let mut state = self.state.clone();
        state[coordinate] += delta;
        Self {
            dim: self.dim,
            state,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphParams {
    pub comm_radius: f64,
    pub sigma: f64,
    pub eigengap_threshold: f64,
}

impl GraphParams {
    /// Parameters with `σ = R⁴ / ln 2`, so that the weight at zero distance is 1.
    pub fn new(comm_radius: f64) -> Self {
        Self {
            comm_radius,
            sigma: default_sigma(comm_radius),
            eigengap_threshold: DEFAULT_EIGENGAP_THRESHOLD,
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<(), GraphError> {
        let ok = self.comm_radius.is_finite()
            && self.comm_radius > 0.0
            && self.sigma.is_finite()
            && self.sigma > 0.0;
        if ok {
            Ok(())
        } else {
            Err(GraphError::InvalidParams {
                radius: self.comm_radius,
                sigma: self.sigma,
            })
        }
    }
}

pub fn default_sigma(comm_radius: f64) -> f64 {
    comm_radius.powi(4) / std::f64::consts::LN_2
}

pub fn edge_weight(distance: f64, params: &GraphParams) -> f64 {
    let r2 = params.comm_radius * params.comm_radius;
    if distance > params.comm_radius {
        return 0.0;
    }
    let gap = r2 - distance * distance;
    (gap * gap / params.sigma).exp_m1()
}

/// `∂a/∂d`, negative on `(0, R)` and zero at and beyond `R`.
pub fn edge_weight_distance_derivative(distance: f64, params: &GraphParams) -> Result<f64, GraphError> {
    if distance <= 0.0 {
        return Err(GraphError::ZeroDistance(distance));
    }
    if distance > params.comm_radius {
        return Ok(0.0);
    }
    let r2 = params.comm_radius * params.comm_radius;
    let gap = r2 - distance * distance;
    Ok(-(4.0 * distance * gap / params.sigma) * (gap * gap / params.sigma).exp())
}

/// Weighted graph with its Laplacian and sorted spectrum.
#[derive(Debug, Clone)]
pub struct SpectralGraph {
    pub weights: DMatrix<f64>,
    pub laplacian: DMatrix<f64>,
    /// Laplacian eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    pub lambda2: f64,
    /// Unit-norm eigenvector of `λ₂`; its first non-negligible entry is positive.
    pub fiedler: DVector<f64>,
    /// `λ₃ − λ₂`, or `+∞` for two robots.
    pub eigengap: f64,
}

impl SpectralGraph {
    /// Builds the spectral data from an explicit weight matrix.
    ///
    /// Bypasses the distance-based weighting, which lets callers study
    /// idealized graphs (unit-weight complete graphs and the like).
    pub fn from_weights(weights: DMatrix<f64>) -> Result<Self, GraphError> {
        let n = weights.nrows();
        if n != weights.ncols() {
            return Err(GraphError::InvalidWeights);
        }
        if n < 2 {
            return Err(GraphError::TooFewRobots {
                required: 2,
                got: n,
            });
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 || w != weights[(j, i)] || (i == j && w != 0.0) {
                    return Err(GraphError::InvalidWeights);
                }
            }
        }

        let mut laplacian = -weights.clone();
        for i in 0..n {
            laplacian[(i, i)] = weights.row(i).sum();
        }

        let eigen = SymmetricEigen::try_new(laplacian.clone(), f64::EPSILON, EIGEN_MAX_ITERATIONS)
            .ok_or_else(|| {
                GraphError::Numerical(format!(
                    "symmetric eigendecomposition of {n}x{n} Laplacian did not converge in {EIGEN_MAX_ITERATIONS} iterations"
                ))
            })?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
        let eigenvalues: Vec<f64> = order.iter().map(|&k| eigen.eigenvalues[k]).collect();

        let scale = eigenvalues[n - 1].abs().max(1.0);
        if eigenvalues[0] < -PSD_TOLERANCE * scale {
            return Err(GraphError::Numerical(format!(
                "Laplacian has negative eigenvalue {:e}",
                eigenvalues[0]
            )));
        }

        let lambda2 = eigenvalues[1].max(0.0);
        let mut fiedler: DVector<f64> = eigen.eigenvectors.column(order[1]).into_owned();
        let norm = fiedler.norm();
        if norm > 0.0 {
            fiedler /= norm;
        }
        if let Some(first) = fiedler.iter().copied().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                fiedler.neg_mut();
            }
        }
        let eigengap = if n > 2 {
            eigenvalues[2] - eigenvalues[1]
        } else {
            f64::INFINITY
        };

        Ok(Self {
            weights,
            laplacian,
            eigenvalues,
            lambda2,
            fiedler,
            eigengap,
        })
    }

    pub fn robot_count(&self) -> usize {
        self.weights.nrows()
    }

    /// Unordered pairs with a strictly positive weight, `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.robot_count();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.weights[(i, j)] > 0.0 {
                    edges.push((i, j));
                }
            }
        }
        edges
    }

    /// Connectivity by graph search over positive-weight edges.
    pub fn is_connected(&self) -> bool {
        let n = self.robot_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                if !seen[j] && self.weights[(i, j)] > 0.0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

pub fn weight_matrix(config: &Configuration, params: &GraphParams) -> Result<DMatrix<f64>, GraphError> {
    params.validate()?;
    let n = config.robot_count();
    let mut weights = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = config.distance(i, j);
            if d == 0.0 {
                return Err(GraphError::CoincidentRobots(i, j));
            }
            let w = edge_weight(d, params);
            weights[(i, j)] = w;
            weights[(j, i)] = w;
        }
    }
    Ok(weights)
}

pub fn build_spectral_graph(config: &Configuration, params: &GraphParams) -> Result<SpectralGraph, GraphError> {
    if config.robot_count() < 2 {
        return Err(GraphError::TooFewRobots {
            required: 2,
            got: config.robot_count(),
        });
    }
    SpectralGraph::from_weights(weight_matrix(config, params)?)
}

/// `β = ∂λ₂/∂x`, stored flat with the same layout as the state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityGradient {
    dim: usize,
    beta: DVector<f64>,
    /// Set when the eigengap was below threshold and `λ₂` may not be differentiable.
    pub degenerate: bool,
}

impl ConnectivityGradient {
    pub fn from_flat(dim: usize, beta: DVector<f64>) -> Self {
        Self {
            dim,
            beta,
            degenerate: false,
        }
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.beta
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.beta.as_slice()[i * self.dim..(i + 1) * self.dim]
    }

    pub fn robot_count(&self) -> usize {
        self.beta.len() / self.dim
    }

    pub fn max_block_norm(&self) -> f64 {
        (0..self.robot_count())
            .map(|i| self.block(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Analytic gradient of `λ₂`:
/// `β_i = Σ_{j ∈ N_i} (∂a_ij/∂d_ij) · (x_i − x_j)/d_ij · (v_i − v_j)²`.
pub fn connectivity_gradient(
    config: &Configuration,
    graph: &SpectralGraph,
    params: &GraphParams,
) -> Result<ConnectivityGradient, GraphError> {
    let n = config.robot_count();
    let dim = config.dim();
    let v = &graph.fiedler;
    let mut beta = DVector::zeros(n * dim);

    for i in 0..n {
        for j in i + 1..n {
            if graph.weights[(i, j)] <= 0.0 {
                continue;
            }
            let d = config.distance(i, j);
            let slope = edge_weight_distance_derivative(d, params)?;
            let dv = v[i] - v[j];
            let coeff = slope * dv * dv / d;
            let (xi, xj) = (config.position(i), config.position(j));
            for c in 0..dim {
                let g = coeff * (xi[c] - xj[c]);
                beta[i * dim + c] += g;
                beta[j * dim + c] -= g;
            }
        }
    }

    let degenerate = graph.eigengap < params.eigengap_threshold;
    if degenerate {
        log::warn!(
            "near-repeated algebraic connectivity (eigengap {:e} < {:e}); gradient may be inaccurate",
            graph.eigengap,
            params.eigengap_threshold
        );
    }
    Ok(ConnectivityGradient { dim, beta, degenerate })
}
