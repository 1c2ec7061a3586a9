//! Closed-loop simulation of `ẋ = u` where `u` is the desired controller
//! filtered through the CBF quadratic program.
//!
//! Each step evaluates the graph, constraints and desired input at the
//! current state, solves the QP, then advances with explicit Euler
//! (zero-order hold on `u`).

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cbf_qp::{
    connectivity_cbf, connectivity_constraint, local_link_constraints, safety_constraints, solve_cbf_qp, CbfParams,
    ConstraintTag, LinearConstraint, QpError,
};
use crate::controllers::{
    consensus_input, lloyd_input, locational_cost, radial_input, voronoi_partition, ControlError, DensityField,
    VoronoiPartition, MIN_RESOLUTION,
};
use crate::graph_topology::{build_spectral_graph, connectivity_gradient, Configuration, GraphError, GraphParams, SpectralGraph};

/// `λ₂` at or below this is treated as disconnected.
pub const DISCONNECTED_LAMBDA2: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("initial configuration is disconnected (lambda2 = {lambda2:e}) but the connectivity constraint is enabled")]
    InitiallyDisconnected { lambda2: f64 },

    #[error("could not spawn a connected configuration in {attempts} attempts")]
    SpawnFailed { attempts: usize },

    #[error("step {step}: {source}")]
    Graph { step: usize, source: GraphError },

    #[error("step {step}: {source}")]
    Qp { step: usize, source: QpError },

    #[error("step {step}: {source}")]
    Control { step: usize, source: ControlError },
}

impl SimError {
    /// True for problems detectable before integrating a single step.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            SimError::InvalidScenario(_) | SimError::InitiallyDisconnected { .. } | SimError::SpawnFailed { .. }
        )
    }

    pub fn step(&self) -> Option<usize> {
        match self {
            SimError::Graph { step, .. } | SimError::Qp { step, .. } | SimError::Control { step, .. } => Some(*step),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintFlags {
    pub connectivity: bool,
    pub safety: bool,
    pub local_link: bool,
}

impl Default for ConstraintFlags {
    fn default() -> Self {
        Self {
            connectivity: true,
            safety: true,
            local_link: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControllerSpec {
    Consensus { gain: f64 },
    Radial { gain: f64 },
    Coverage { gain: f64, density: DensityField, resolution: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpawnRegion {
    pub seed: u64,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub max_attempts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPlacement {
    Explicit(Vec<Vec<f64>>),
    Spawn(SpawnRegion),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub robots: usize,
    pub dim: usize,
    pub initial: InitialPlacement,
    pub graph: GraphParams,
    pub cbf: CbfParams,
    pub constraints: ConstraintFlags,
    pub controller: ControllerSpec,
    pub dt: f64,
    pub horizon: f64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        if self.robots < 2 {
            return bad(format!("robots = {} (need at least 2)", self.robots));
        }
        if !(1..=3).contains(&self.dim) {
            return bad(format!("dim = {} (must be 1, 2 or 3)", self.dim));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt = {} (must be > 0)", self.dt));
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return bad(format!("horizon = {} (must be >= 0)", self.horizon));
        }
        if self.horizon > 0.0 && self.horizon < self.dt {
            return bad(format!("horizon = {} is shorter than dt = {}", self.horizon, self.dt));
        }
        if let Err(e) = self.graph.validate() {
            return bad(e.to_string());
        }
        let c = &self.cbf;
        if !(c.epsilon > 0.0) {
            return bad(format!("epsilon = {} (must be > 0)", c.epsilon));
        }
        for (name, v) in [
            ("phi", c.phi),
            ("gain_safety", c.gain_safety),
            ("gain_local", c.gain_local),
            ("d_min", c.d_min),
            ("safety_radius", c.safety_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} (must be > 0)"));
            }
        }
        if c.d_min >= self.graph.comm_radius {
            return bad(format!(
                "d_min = {} must be smaller than comm_radius = {}; otherwise no link can satisfy the safety distance",
                c.d_min, self.graph.comm_radius
            ));
        }
        match &self.controller {
            ControllerSpec::Consensus { gain } | ControllerSpec::Radial { gain } if !(*gain > 0.0) => {
                return bad(format!("controller gain = {gain} (must be > 0)"));
            }
            ControllerSpec::Radial { .. } if self.dim != 2 => {
                return bad("radial controller needs dim = 2".into());
            }
            ControllerSpec::Coverage {
                gain,
                density,
                resolution,
            } => {
                if !(*gain > 0.0) {
                    return bad(format!("controller gain = {gain} (must be > 0)"));
                }
                if self.dim != 2 {
                    return bad("coverage controller needs dim = 2".into());
                }
                if *resolution < MIN_RESOLUTION {
                    return bad(format!("resolution = {resolution} (must be >= {MIN_RESOLUTION})"));
                }
                if let Err(e) = density.validate() {
                    return bad(e.to_string());
                }
            }
            _ => {}
        }
        match &self.initial {
            InitialPlacement::Explicit(points) => {
                if points.len() != self.robots {
                    return bad(format!("{} initial positions for {} robots", points.len(), self.robots));
                }
                if let Some(p) = points.iter().find(|p| p.len() != self.dim) {
                    return bad(format!("initial position {p:?} does not have dim = {}", self.dim));
                }
                if points.iter().flatten().any(|v| !v.is_finite()) {
                    return bad("initial positions must be finite".into());
                }
            }
            InitialPlacement::Spawn(region) => {
                if region.min.len() != self.dim || region.max.len() != self.dim {
                    return bad(format!("spawn region corners must have dim = {}", self.dim));
                }
                if region.min.iter().zip(&region.max).any(|(a, b)| !(a < b)) {
                    return bad("spawn region min must be below max in every coordinate".into());
                }
                if region.max_attempts == 0 {
                    return bad("spawn max_attempts must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// `⌈T / dt⌉`, robust to rounding in `T / dt`.
    pub fn step_count(&self) -> usize {
        let ratio = self.horizon / self.dt;
        let nearest = ratio.round();
        if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
            nearest as usize
        } else {
            ratio.ceil() as usize
        }
    }

    pub fn initial_configuration(&self) -> Result<Configuration, SimError> {
        match &self.initial {
            InitialPlacement::Explicit(points) => {
                Configuration::from_points(points).map_err(|e| SimError::InvalidScenario(e.to_string()))
            }
            InitialPlacement::Spawn(region) => spawn(self, region),
        }
    }
}

/// Uniform rejection sampling: robots keep more than `d_min` apart and the
/// resulting graph must be connected.
fn spawn(scenario: &ScenarioConfig, region: &SpawnRegion) -> Result<Configuration, SimError> {
    const PLACEMENT_TRIES: usize = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(region.seed);
    let d_min = scenario.cbf.d_min;

    'attempt: for _ in 0..region.max_attempts {
        let mut points: Vec<Vec<f64>> = Vec::with_capacity(scenario.robots);
        for _ in 0..scenario.robots {
            let mut placed = false;
            for _ in 0..PLACEMENT_TRIES {
                let p: Vec<f64> = region
                    .min
                    .iter()
                    .zip(&region.max)
                    .map(|(&lo, &hi)| rng.gen_range(lo..hi))
                    .collect();
                let clear = points.iter().all(|q| {
                    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() > d_min
                });
                if clear {
                    points.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'attempt;
            }
        }
        let config = Configuration::from_points(&points).map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if let Ok(graph) = build_spectral_graph(&config, &scenario.graph) {
            if graph.is_connected() && graph.lambda2 > DISCONNECTED_LAMBDA2 {
                return Ok(config);
            }
        }
    }
    Err(SimError::SpawnFailed {
        attempts: region.max_attempts,
    })
}

/// Control quantities of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlRecord {
    pub u_des: DVector<f64>,
    pub u: DVector<f64>,
    pub active_set: Vec<ConstraintTag>,
    pub deformation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub positions: DVector<f64>,
    pub lambda2: f64,
    pub min_distance: f64,
    /// `λ₂ − ε` when the connectivity barrier is enabled.
    pub h_connectivity: Option<f64>,
    /// Smallest `d_ij² − d_min²` over all pairs when safety is enabled.
    pub h_safety_min: Option<f64>,
    /// Smallest `R² − d_ij²` over the initial edges when local links are enabled.
    pub h_local_min: Option<f64>,
    pub locational_cost: Option<f64>,
    pub degenerate_spectrum: bool,
    /// Missing on the final record and on a record where the QP failed.
    pub control: Option<ControlRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub robots: usize,
    pub dim: usize,
    pub records: Vec<StepRecord>,
}

impl TrajectoryLog {
    pub fn lambda2(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.lambda2).collect()
    }

    pub fn min_lambda2(&self) -> f64 {
        self.records.iter().map(|r| r.lambda2).fold(f64::INFINITY, f64::min)
    }

    pub fn min_distance(&self) -> f64 {
        self.records.iter().map(|r| r.min_distance).fold(f64::INFINITY, f64::min)
    }

    pub fn last(&self) -> &StepRecord {
        self.records.last().expect("a log always holds the initial record")
    }
}

/// A run that stopped early; `log` holds every record up to the failing state.
#[derive(Debug, Clone, Error)]
#[error("{error}")]
pub struct ScenarioFailure {
    pub log: Option<TrajectoryLog>,
    pub error: SimError,
}

/// Scenario bound to the data captured at `t = 0`.
#[derive(Debug, Clone)]
pub struct Simulator {
    scenario: ScenarioConfig,
    initial_edges: Vec<(usize, usize)>,
}

struct Observation {
    record: StepRecord,
    graph: SpectralGraph,
    partition: Option<VoronoiPartition>,
}

impl Simulator {
    /// Validates the scenario and places the robots.
    pub fn new(scenario: ScenarioConfig) -> Result<(Self, Configuration), SimError> {
        scenario.validate()?;
        let config = scenario.initial_configuration()?;
        let graph = build_spectral_graph(&config, &scenario.graph).map_err(|e| match e {
            GraphError::CoincidentRobots(..) => SimError::InvalidScenario(e.to_string()),
            source => SimError::Graph { step: 0, source },
        })?;
        if scenario.constraints.connectivity && graph.lambda2 <= DISCONNECTED_LAMBDA2 {
            return Err(SimError::InitiallyDisconnected {
                lambda2: graph.lambda2,
            });
        }
        let initial_edges = graph.edges();
        Ok((
            Self {
                scenario,
                initial_edges,
            },
            config,
        ))
    }

    pub fn scenario(&self) -> &ScenarioConfig {
        &self.scenario
    }

    pub fn initial_edges(&self) -> &[(usize, usize)] {
        &self.initial_edges
    }

    fn observe(&self, config: &Configuration, step: usize) -> Result<Observation, SimError> {
        let s = &self.scenario;
        let graph = build_spectral_graph(config, &s.graph).map_err(|source| SimError::Graph { step, source })?;
        let partition = match &s.controller {
            ControllerSpec::Coverage {
                density, resolution, ..
            } => Some(
                voronoi_partition(config, density, *resolution).map_err(|source| SimError::Control { step, source })?,
            ),
            _ => None,
        };

        let n = config.robot_count();
        let d_min2 = s.cbf.d_min * s.cbf.d_min;
        let r2 = s.graph.comm_radius * s.graph.comm_radius;
        let min_distance = config.min_pairwise_distance();
        let h_local_min = s.constraints.local_link.then(|| {
            self.initial_edges
                .iter()
                .map(|&(i, j)| r2 - config.distance(i, j).powi(2))
                .fold(f64::INFINITY, f64::min)
        });
        let record = StepRecord {
            step,
            time: step as f64 * s.dt,
            positions: config.state().clone(),
            lambda2: graph.lambda2,
            min_distance,
            h_connectivity: s.constraints.connectivity.then(|| connectivity_cbf(graph.lambda2, s.cbf.epsilon)),
            h_safety_min: (s.constraints.safety && n > 1).then(|| min_distance * min_distance - d_min2),
            h_local_min,
            locational_cost: partition.as_ref().map(|p| locational_cost(config, p)),
            degenerate_spectrum: graph.eigengap < s.graph.eigengap_threshold,
            control: None,
        };
        Ok(Observation {
            record,
            graph,
            partition,
        })
    }

    /// Rows of the QP at `config`, in assembly order.
    pub fn constraints(
        &self,
        config: &Configuration,
        graph: &SpectralGraph,
        step: usize,
    ) -> Result<Vec<LinearConstraint>, SimError> {
        let s = &self.scenario;
        let mut rows = Vec::new();
        if s.constraints.connectivity {
            let beta = connectivity_gradient(config, graph, &s.graph).map_err(|source| SimError::Graph { step, source })?;
            rows.push(
                connectivity_constraint(&beta, graph.lambda2, &s.cbf).map_err(|source| SimError::Qp { step, source })?,
            );
        }
        if s.constraints.safety {
            rows.extend(safety_constraints(config, &s.cbf));
        }
        if s.constraints.local_link {
            rows.extend(local_link_constraints(&self.initial_edges, config, s.graph.comm_radius, &s.cbf));
        }
        Ok(rows)
    }

    fn desired_input(
        &self,
        config: &Configuration,
        obs: &Observation,
        step: usize,
    ) -> Result<DVector<f64>, SimError> {
        match &self.scenario.controller {
            ControllerSpec::Consensus { gain } => Ok(consensus_input(config, &obs.graph, *gain)),
            ControllerSpec::Radial { gain } => {
                radial_input(config, *gain).map_err(|source| SimError::Control { step, source })
            }
            ControllerSpec::Coverage { gain, .. } => {
                let partition = obs.partition.as_ref().expect("coverage observation carries a partition");
                Ok(lloyd_input(config, partition, *gain))
            }
        }
    }

    fn control(&self, config: &Configuration, obs: &Observation, step: usize) -> Result<ControlRecord, SimError> {
        let u_des = self.desired_input(config, obs, step)?;
        let rows = self.constraints(config, &obs.graph, step)?;
        let solution = solve_cbf_qp(&u_des, &rows).map_err(|source| SimError::Qp { step, source })?;
        Ok(ControlRecord {
            u_des,
            u: solution.u,
            active_set: solution.active_set,
            deformation: solution.deformation,
        })
    }

    /// Record at `config` and the state one `dt` later.
    pub fn step(&self, config: &Configuration, step: usize) -> Result<(Configuration, StepRecord), SimError> {
        let obs = self.observe(config, step)?;
        let control = self.control(config, &obs, step)?;
        let next = config.advanced(&control.u, self.scenario.dt);
        let mut record = obs.record;
        record.control = Some(control);
        Ok((next, record))
    }

    /// Integrates from `initial` for the full horizon.
    pub fn run_from(&self, initial: Configuration) -> Result<TrajectoryLog, ScenarioFailure> {
        let steps = self.scenario.step_count();
        let mut log = TrajectoryLog {
            robots: initial.robot_count(),
            dim: initial.dim(),
            records: Vec::with_capacity(steps + 1),
        };
        let mut config = initial;
        for k in 0..=steps {
            let obs = match self.observe(&config, k) {
                Ok(obs) => obs,
                Err(error) => {
                    return Err(ScenarioFailure { log: Some(log), error });
                }
            };
            if k == steps {
                log.records.push(obs.record);
                break;
            }
            match self.control(&config, &obs, k) {
                Ok(control) => {
                    let next = config.advanced(&control.u, self.scenario.dt);
                    let mut record = obs.record;
                    record.control = Some(control);
                    log.records.push(record);
                    config = next;
                }
                Err(error) => {
                    log.records.push(obs.record);
                    return Err(ScenarioFailure { log: Some(log), error });
                }
            }
        }
        Ok(log)
    }
}

/// One step of the closed loop for a scenario whose initial edges are `initial_edges`.
pub fn step(
    config: &Configuration,
    scenario: &ScenarioConfig,
    initial_edges: &[(usize, usize)],
    index: usize,
) -> Result<(Configuration, StepRecord), SimError> {
    let sim = Simulator {
        scenario: scenario.clone(),
        initial_edges: initial_edges.to_vec(),
    };
    sim.step(config, index)
}

pub fn run_scenario(scenario: &ScenarioConfig) -> Result<TrajectoryLog, ScenarioFailure> {
    let (sim, initial) = Simulator::new(scenario.clone()).map_err(|error| ScenarioFailure { log: None, error })?;
    sim.run_from(initial)
}
