//! Versioned TOML scenario files.
//!
//! ```toml
//! version = 1
//! robots = 4
//! horizon = 20.0
//!
//! [graph]
//! comm_radius = 5.0
//!
//! [cbf]
//! epsilon = 0.1
//!
//! [controller]
//! kind = "radial"
//! ```
//!
//! Optional keys fall back to the defaults in [`defaults`]; unknown keys are
//! rejected. Lengths are in meters and times in seconds.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cbf_qp::{CbfParams, ClassK};
use crate::controllers::DensityField;
use crate::graph_topology::{default_sigma, GraphParams, DEFAULT_EIGENGAP_THRESHOLD};
use crate::simulator::{ConstraintFlags, ControllerSpec, InitialPlacement, ScenarioConfig, SimError, SpawnRegion};

pub const FORMAT_VERSION: u32 = 1;

pub mod defaults {
    pub const DIM: usize = 2;
    pub const DT: f64 = 0.01;
    pub const PHI: f64 = 1.0;
    pub const GAIN_SAFETY: f64 = 1.0;
    pub const GAIN_LOCAL: f64 = 1.0;
    pub const D_MIN: f64 = 1.5;
    /// Safety rows are assembled for pairs closer than this multiple of `d_min`.
    pub const SAFETY_RADIUS_FACTOR: f64 = 3.0;
    pub const CONTROLLER_GAIN: f64 = 1.0;
    pub const RESOLUTION: usize = 64;
    pub const SEED: u64 = 0;
    pub const SPAWN_ATTEMPTS: usize = 1000;
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{origin}: {message}")]
    Syntax { origin: String, message: String },

    #[error("{origin}: unsupported scenario version {found} (expected {FORMAT_VERSION})")]
    Version { origin: String, found: u32 },

    #[error("{origin}: field `{field}`: {message}")]
    Field {
        origin: String,
        field: &'static str,
        message: String,
    },

    #[error("{origin}: {source}")]
    Invalid {
        origin: String,
        #[source]
        source: SimError,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub robots: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub horizon: f64,
    pub graph: GraphSection,
    pub cbf: CbfSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<ConstraintSection>,
    pub controller: ControllerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub comm_radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigengap_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CbfSection {
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<ClassK>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_safety: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_local: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_link: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSection {
    Consensus {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gain: Option<f64>,
    },
    Radial {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gain: Option<f64>,
    },
    Coverage {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gain: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resolution: Option<usize>,
        density: DensityField,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spawn: Option<SpawnSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpawnSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<usize>,
}

impl ScenarioFile {
    /// Applies defaults and validates.
    pub fn resolve(&self, origin: &str) -> Result<ScenarioConfig, ConfigError> {
        let field = |field: &'static str, message: String| ConfigError::Field {
            origin: origin.to_owned(),
            field,
            message,
        };
        if self.version != FORMAT_VERSION {
            return Err(ConfigError::Version {
                origin: origin.to_owned(),
                found: self.version,
            });
        }

        let dim = self.dim.unwrap_or(defaults::DIM);
        let radius = self.graph.comm_radius;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(field("graph.comm_radius", format!("{radius} must be > 0")));
        }
        let graph = GraphParams {
            comm_radius: radius,
            sigma: self.graph.sigma.unwrap_or_else(|| default_sigma(radius)),
            eigengap_threshold: self.graph.eigengap_threshold.unwrap_or(DEFAULT_EIGENGAP_THRESHOLD),
        };
        if !(graph.sigma > 0.0) {
            return Err(field("graph.sigma", format!("{} must be > 0", graph.sigma)));
        }
        if !(graph.eigengap_threshold >= 0.0) {
            return Err(field(
                "graph.eigengap_threshold",
                format!("{} must be >= 0", graph.eigengap_threshold),
            ));
        }

        let c = &self.cbf;
        if !(c.epsilon > 0.0 && c.epsilon.is_finite()) {
            return Err(field(
                "cbf.epsilon",
                format!("{} must be > 0 (the connectivity threshold is strictly positive)", c.epsilon),
            ));
        }
        let d_min = c.d_min.unwrap_or(defaults::D_MIN);
        if !(d_min > 0.0) {
            return Err(field("cbf.d_min", format!("{d_min} must be > 0")));
        }
        if d_min >= radius {
            return Err(field(
                "cbf.d_min",
                format!(
                    "{d_min} must be smaller than graph.comm_radius = {radius}; \
                     a safety distance at or beyond the communication range forbids every link"
                ),
            ));
        }
        let cbf = CbfParams {
            epsilon: c.epsilon,
            phi: c.phi.unwrap_or(defaults::PHI),
            alpha: c.alpha.unwrap_or_default(),
            gain_safety: c.gain_safety.unwrap_or(defaults::GAIN_SAFETY),
            gain_local: c.gain_local.unwrap_or(defaults::GAIN_LOCAL),
            d_min,
            safety_radius: c.safety_radius.unwrap_or(defaults::SAFETY_RADIUS_FACTOR * d_min),
        };

        let flags = self.constraints.clone().unwrap_or(ConstraintSection {
            connectivity: None,
            safety: None,
            local_link: None,
        });
        let fallback = ConstraintFlags::default();
        let constraints = ConstraintFlags {
            connectivity: flags.connectivity.unwrap_or(fallback.connectivity),
            safety: flags.safety.unwrap_or(fallback.safety),
            local_link: flags.local_link.unwrap_or(fallback.local_link),
        };

        let controller = match &self.controller {
            ControllerSection::Consensus { gain } => ControllerSpec::Consensus {
                gain: gain.unwrap_or(defaults::CONTROLLER_GAIN),
            },
            ControllerSection::Radial { gain } => ControllerSpec::Radial {
                gain: gain.unwrap_or(defaults::CONTROLLER_GAIN),
            },
            ControllerSection::Coverage {
                gain,
                resolution,
                density,
            } => ControllerSpec::Coverage {
                gain: gain.unwrap_or(defaults::CONTROLLER_GAIN),
                density: density.clone(),
                resolution: resolution.unwrap_or(defaults::RESOLUTION),
            },
        };

        let initial = match &self.initial {
            Some(InitialSection {
                positions: Some(_),
                spawn: Some(_),
            }) => {
                return Err(field(
                    "initial",
                    "give either `positions` or `spawn`, not both".into(),
                ))
            }
            Some(InitialSection {
                positions: Some(points),
                ..
            }) => InitialPlacement::Explicit(points.clone()),
            Some(InitialSection { spawn: Some(s), .. }) => InitialPlacement::Spawn(SpawnRegion {
                seed: s.seed.unwrap_or(defaults::SEED),
                min: s.min.clone(),
                max: s.max.clone(),
                max_attempts: s.max_attempts.unwrap_or(defaults::SPAWN_ATTEMPTS),
            }),
            _ => {
                // Square sized so neighbours on a loose lattice stay in range.
                let per_side = (self.robots as f64).powf(1.0 / dim.max(1) as f64).ceil();
                let side = 0.6 * radius * per_side.max(1.0);
                InitialPlacement::Spawn(SpawnRegion {
                    seed: defaults::SEED,
                    min: vec![0.0; dim],
                    max: vec![side; dim],
                    max_attempts: defaults::SPAWN_ATTEMPTS,
                })
            }
        };

        let config = ScenarioConfig {
            name: self.name.clone().unwrap_or_else(|| "scenario".into()),
            robots: self.robots,
            dim,
            initial,
            graph,
            cbf,
            constraints,
            controller,
            dt: self.dt.unwrap_or(defaults::DT),
            horizon: self.horizon,
        };
        config.validate().map_err(|source| ConfigError::Invalid {
            origin: origin.to_owned(),
            source,
        })?;
        Ok(config)
    }

    /// Fully explicit file for `config`; parsing it yields `config` again.
    pub fn from_config(config: &ScenarioConfig) -> Self {
        let controller = match &config.controller {
            ControllerSpec::Consensus { gain } => ControllerSection::Consensus { gain: Some(*gain) },
            ControllerSpec::Radial { gain } => ControllerSection::Radial { gain: Some(*gain) },
            ControllerSpec::Coverage {
                gain,
                density,
                resolution,
            } => ControllerSection::Coverage {
                gain: Some(*gain),
                resolution: Some(*resolution),
                density: density.clone(),
            },
        };
        let initial = match &config.initial {
            InitialPlacement::Explicit(points) => InitialSection {
                positions: Some(points.clone()),
                spawn: None,
            },
            InitialPlacement::Spawn(s) => InitialSection {
                positions: None,
                spawn: Some(SpawnSection {
                    seed: Some(s.seed),
                    min: s.min.clone(),
                    max: s.max.clone(),
                    max_attempts: Some(s.max_attempts),
                }),
            },
        };
        Self {
            version: FORMAT_VERSION,
            name: Some(config.name.clone()),
            robots: config.robots,
            dim: Some(config.dim),
            dt: Some(config.dt),
            horizon: config.horizon,
            graph: GraphSection {
                comm_radius: config.graph.comm_radius,
                sigma: Some(config.graph.sigma),
                eigengap_threshold: Some(config.graph.eigengap_threshold),
            },
            cbf: CbfSection {
                epsilon: config.cbf.epsilon,
                phi: Some(config.cbf.phi),
                alpha: Some(config.cbf.alpha),
                gain_safety: Some(config.cbf.gain_safety),
                gain_local: Some(config.cbf.gain_local),
                d_min: Some(config.cbf.d_min),
                safety_radius: Some(config.cbf.safety_radius),
            },
            constraints: Some(ConstraintSection {
                connectivity: Some(config.constraints.connectivity),
                safety: Some(config.constraints.safety),
                local_link: Some(config.constraints.local_link),
            }),
            controller,
            initial: Some(initial),
        }
    }
}

pub fn parse_scenario_str(text: &str, origin: &str) -> Result<ScenarioConfig, ConfigError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ConfigError::Syntax {
        origin: origin.to_owned(),
        message: e.to_string(),
    })?;
    file.resolve(origin)
}

pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_scenario_str(&text, &path.display().to_string())
}

/// TOML text of the fully resolved scenario.
pub fn resolved_scenario_toml(config: &ScenarioConfig) -> String {
    toml::to_string_pretty(&ScenarioFile::from_config(config)).expect("scenario files always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
robots = 4
horizon = 20.0

[graph]
comm_radius = 5.0

[cbf]
epsilon = 0.1

[controller]
kind = "radial"
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let c = parse_scenario_str(MINIMAL, "minimal").unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.dt, defaults::DT);
        assert_eq!(c.graph.sigma, default_sigma(5.0));
        assert_eq!(c.cbf.phi, 1.0);
        assert_eq!(c.cbf.d_min, 1.5);
        assert_eq!(c.cbf.safety_radius, 4.5);
        assert_eq!(c.controller, ControllerSpec::Radial { gain: 1.0 });
        assert_eq!(c.constraints, ConstraintFlags::default());
        assert!(matches!(c.initial, InitialPlacement::Spawn(_)));
    }

    #[test]
    fn zero_epsilon_is_rejected() {
        let text = MINIMAL.replace("epsilon = 0.1", "epsilon = 0.0");
        let err = parse_scenario_str(&text, "f").unwrap_err();
        assert!(matches!(err, ConfigError::Field { field: "cbf.epsilon", .. }), "{err}");
    }

    #[test]
    fn d_min_beyond_radius_is_rejected() {
        let text = MINIMAL.replace("epsilon = 0.1", "epsilon = 0.1\nd_min = 6.0");
        let err = parse_scenario_str(&text, "f").unwrap_err();
        assert!(err.to_string().contains("forbids every link"), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = MINIMAL.replace("comm_radius = 5.0", "comm_radius = 5.0\nradius_typo = 3");
        let err = parse_scenario_str(&text, "f").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, ConfigError::Syntax { .. }));
        assert!(msg.contains("radius_typo") && msg.contains("line"), "{msg}");
    }

    #[test]
    fn missing_key_is_reported() {
        let text = MINIMAL.replace("horizon = 20.0", "");
        let msg = parse_scenario_str(&text, "f").unwrap_err().to_string();
        assert!(msg.contains("horizon"), "{msg}");
    }

    #[test]
    fn wrong_version() {
        let text = MINIMAL.replace("version = 1", "version = 7");
        assert!(matches!(
            parse_scenario_str(&text, "f"),
            Err(ConfigError::Version { found: 7, .. })
        ));
    }

    #[test]
    fn positions_and_spawn_are_exclusive() {
        let text = format!("{MINIMAL}\n[initial]\npositions = [[0.0, 0.0]]\n[initial.spawn]\nmin = [0.0, 0.0]\nmax = [1.0, 1.0]\n");
        let err = parse_scenario_str(&text, "f").unwrap_err();
        assert!(matches!(err, ConfigError::Field { field: "initial", .. }), "{err}");
    }

    #[test]
    fn resolved_echo_round_trips() {
        let c = parse_scenario_str(MINIMAL, "minimal").unwrap();
        let echoed = resolved_scenario_toml(&c);
        assert_eq!(parse_scenario_str(&echoed, "echo").unwrap(), c);
    }
}
