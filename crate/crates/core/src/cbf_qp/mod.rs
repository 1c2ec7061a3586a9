//! Control barrier function constraints for single-integrator robots and the
//! minimally invasive safety filter.
//!
//! With `ẋ = u` every barrier `h` yields one linear row `∇h · u ≥ −α(h)`.
//! Three families are supported:
//!
//! * global connectivity, `h = λ₂ − ε`, with `∇h = β`;
//! * pairwise safety, `h = d_ij² − d_min²`;
//! * local links, `h = R² − d_ij²` for every edge present at start-up.
//!
//! All rows are stacked into one QP and solved by [`solve_cbf_qp`].

mod solver;

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph_topology::{Configuration, ConnectivityGradient};

pub use solver::FEASIBILITY_TOLERANCE;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("constraint set is infeasible; conflicting constraints: {}", format_tags(.tags))]
    Infeasible { tags: Vec<ConstraintTag> },

    #[error("connectivity gradient vanished while lambda2 = {lambda2} is below epsilon = {epsilon}")]
    ZeroGradient { lambda2: f64, epsilon: f64 },

    #[error("active-set iteration limit reached")]
    IterationLimit,

    #[error("non-finite input to the QP ({0})")]
    NonFinite(&'static str),

    #[error("constraint row has length {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lambda2 = {0} is outside the connected domain (must be > 0)")]
    OutsideDomain(f64),
}

fn format_tags(tags: &[ConstraintTag]) -> String {
    tags.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Shape of the extended class-K function applied to the connectivity barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassK {
    #[default]
    Linear,
    Cubic,
}

impl ClassK {
    pub fn apply(self, gain: f64, h: f64) -> f64 {
        match self {
            ClassK::Linear => gain * h,
            ClassK::Cubic => gain * h * h * h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CbfParams {
    /// Connectivity threshold `ε`.
    pub epsilon: f64,
    /// Gain `φ` of the connectivity class-K function.
    pub phi: f64,
    pub alpha: ClassK,
    pub gain_safety: f64,
    pub gain_local: f64,
    pub d_min: f64,
    /// Pairs farther apart than this get no safety row.
    pub safety_radius: f64,
}

impl CbfParams {
    pub fn new(epsilon: f64, d_min: f64) -> Self {
        Self {
            epsilon,
            phi: 1.0,
            alpha: ClassK::Linear,
            gain_safety: 1.0,
            gain_local: 1.0,
            d_min,
            safety_radius: 3.0 * d_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConstraintTag {
    Connectivity,
    Safety(usize, usize),
    LocalLink(usize, usize),
}

impl fmt::Display for ConstraintTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintTag::Connectivity => write!(f, "connectivity"),
            ConstraintTag::Safety(i, j) => write!(f, "safety({i},{j})"),
            ConstraintTag::LocalLink(i, j) => write!(f, "local_link({i},{j})"),
        }
    }
}

/// One row of `A·u ≥ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coefficients: DVector<f64>,
    pub bound: f64,
    pub tag: ConstraintTag,
}

impl LinearConstraint {
    pub fn slack(&self, u: &DVector<f64>) -> f64 {
        self.coefficients.dot(u) - self.bound
    }

    pub fn is_satisfied(&self, u: &DVector<f64>, tolerance: f64) -> bool {
        self.slack(u) >= -tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u: DVector<f64>,
    /// Tags of constraints tight at `u`, in assembly order.
    pub active_set: Vec<ConstraintTag>,
    /// Lagrange multipliers aligned with `active_set`.
    pub multipliers: Vec<f64>,
    /// `‖u − u_des‖`.
    pub deformation: f64,
}

pub fn connectivity_cbf(lambda2: f64, epsilon: f64) -> f64 {
    lambda2 - epsilon
}

/// `β · u ≥ −α(λ₂ − ε)`.
pub fn connectivity_constraint(
    beta: &ConnectivityGradient,
    lambda2: f64,
    params: &CbfParams,
) -> Result<LinearConstraint, QpError> {
    let h = connectivity_cbf(lambda2, params.epsilon);
    let coefficients = beta.as_vector().clone();
    if h < 0.0 && coefficients.iter().all(|&c| c == 0.0) {
        return Err(QpError::ZeroGradient {
            lambda2,
            epsilon: params.epsilon,
        });
    }
    Ok(LinearConstraint {
        coefficients,
        bound: -params.alpha.apply(params.phi, h),
        tag: ConstraintTag::Connectivity,
    })
}

/// Safety row for one pair; symmetric in `(i, j)`.
pub fn safety_constraint(config: &Configuration, i: usize, j: usize, params: &CbfParams) -> LinearConstraint {
    let (i, j) = (i.min(j), i.max(j));
    let d = config.distance(i, j);
    let h = d * d - params.d_min * params.d_min;
    LinearConstraint {
        coefficients: pair_row(config, i, j, 2.0),
        bound: -params.gain_safety * h,
        tag: ConstraintTag::Safety(i, j),
    }
}

pub fn safety_constraints(config: &Configuration, params: &CbfParams) -> Vec<LinearConstraint> {
    let n = config.robot_count();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if config.distance(i, j) < params.safety_radius {
                rows.push(safety_constraint(config, i, j, params));
            }
        }
    }
    rows
}

/// One row per initial edge keeping `d_ij ≤ R`.
pub fn local_link_constraints(
    initial_edges: &[(usize, usize)],
    config: &Configuration,
    comm_radius: f64,
    params: &CbfParams,
) -> Vec<LinearConstraint> {
    initial_edges
        .iter()
        .map(|&(i, j)| {
            let (i, j) = (i.min(j), i.max(j));
            let d = config.distance(i, j);
            let h = comm_radius * comm_radius - d * d;
            LinearConstraint {
                coefficients: pair_row(config, i, j, -2.0),
                bound: -params.gain_local * h,
                tag: ConstraintTag::LocalLink(i, j),
            }
        })
        .collect()
}

/// Row with `scale·(x_i − x_j)` on block `i` and its negation on block `j`.
fn pair_row(config: &Configuration, i: usize, j: usize, scale: f64) -> DVector<f64> {
    let dim = config.dim();
    let mut row = DVector::zeros(config.state().len());
    let (xi, xj) = (config.position(i), config.position(j));
    for c in 0..dim {
        let g = scale * (xi[c] - xj[c]);
        row[i * dim + c] = g;
        row[j * dim + c] = -g;
    }
    row
}

/// `argmin ½‖u − u_des‖²` subject to every constraint.
pub fn solve_cbf_qp(u_des: &DVector<f64>, constraints: &[LinearConstraint]) -> Result<QpSolution, QpError> {
    if u_des.iter().any(|v| !v.is_finite()) {
        return Err(QpError::NonFinite("desired input"));
    }
    for c in constraints {
        if c.coefficients.len() != u_des.len() {
            return Err(QpError::DimensionMismatch {
                expected: u_des.len(),
                got: c.coefficients.len(),
            });
        }
        if !c.bound.is_finite() || c.coefficients.iter().any(|v| !v.is_finite()) {
            return Err(QpError::NonFinite("constraint"));
        }
    }

    let rows: Vec<&DVector<f64>> = constraints.iter().map(|c| &c.coefficients).collect();
    let bounds: Vec<f64> = constraints.iter().map(|c| c.bound).collect();
    let projection = solver::project(u_des, &rows, &bounds).map_err(|failure| match failure {
        solver::SolveFailure::Infeasible(indices) => QpError::Infeasible {
            tags: indices.into_iter().map(|k| constraints[k].tag).collect(),
        },
        solver::SolveFailure::IterationLimit => QpError::IterationLimit,
    })?;

    let deformation = (&projection.u - u_des).norm();
    Ok(QpSolution {
        active_set: projection.active.iter().map(|&k| constraints[k].tag).collect(),
        multipliers: projection.multipliers,
        u: projection.u,
        deformation,
    })
}

/// Lyapunov-like distance to the safe set: `0` inside, `ε − λ₂` outside.
pub fn clf_value(lambda2: f64, epsilon: f64) -> Result<f64, QpError> {
    if lambda2 <= 0.0 {
        return Err(QpError::OutsideDomain(lambda2));
    }
    Ok(if lambda2 >= epsilon { 0.0 } else { epsilon - lambda2 })
}
