//! Connectivity maintenance for multi-robot teams with control barrier functions.
//!
//! A desired velocity for the whole team is passed through a quadratic
//! program that keeps the algebraic connectivity `λ₂` of the proximity
//! graph above a threshold `ε`, optionally together with pairwise collision
//! avoidance. The crate also ships the desired controllers (consensus,
//! radial dispersal, Lloyd coverage), an Euler simulator and the `conncbf`
//! command-line tool.
//!
//! ```
//! use conncbf::graph_topology::{build_spectral_graph, connectivity_gradient, Configuration, GraphParams};
//! use conncbf::cbf_qp::{connectivity_constraint, solve_cbf_qp, CbfParams};
//! use nalgebra::DVector;
//!
//! let params = GraphParams::new(2.0);
//! let x = Configuration::from_points(&[[0.0, 0.0], [1.5, 0.0], [3.0, 0.2]]).unwrap();
//! let graph = build_spectral_graph(&x, &params).unwrap();
//! let beta = connectivity_gradient(&x, &graph, &params).unwrap();
//! let row = connectivity_constraint(&beta, graph.lambda2, &CbfParams::new(0.1, 0.5)).unwrap();
//!
//! // Pull the end robots apart; the filter trims the motion that would disconnect the team.
//! let u_des = DVector::from_vec(vec![-1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
//! let u = solve_cbf_qp(&u_des, &[row]).unwrap().u;
//! assert!(u.norm() <= u_des.norm());
//! ```

// `!(x > 0.0)` is used on purpose throughout validation so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cbf_qp;
pub mod cli_io;
pub mod controllers;
pub mod graph_topology;
pub mod simulator;

pub use cbf_qp::{solve_cbf_qp, CbfParams, ConstraintTag, LinearConstraint, QpError, QpSolution};
pub use graph_topology::{build_spectral_graph, connectivity_gradient, Configuration, GraphParams, SpectralGraph};
pub use simulator::{run_scenario, ScenarioConfig, SimError, Simulator, TrajectoryLog};
