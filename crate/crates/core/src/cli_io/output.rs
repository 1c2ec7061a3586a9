//! CSV emission of trajectory logs.
//!
//! * `metrics.csv`: `t,lambda2,min_dist,h_conn,h_safety_min,H_cost,deformation`
//! * `positions.csv`: `t,x_1_1,…,x_N_n` (robot, then coordinate, both 1-based)
//! * `resolved_scenario.toml`: every parameter, defaults included
//! * `error.txt`: only for runs that stopped early
//!
//! Numbers carry 9 significant digits. Quantities that do not apply to a
//! run (a disabled barrier, the cost of a non-coverage run, the control
//! deformation of the final state) are written as `NaN`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::scenario_file::resolved_scenario_toml;
use crate::simulator::{ScenarioConfig, SimError, TrajectoryLog};

pub const METRICS_FILE: &str = "metrics.csv";
pub const POSITIONS_FILE: &str = "positions.csv";
pub const RESOLVED_FILE: &str = "resolved_scenario.toml";
pub const ERROR_FILE: &str = "error.txt";

pub const METRICS_HEADER: [&str; 7] = ["t", "lambda2", "min_dist", "h_conn", "h_safety_min", "H_cost", "deformation"];

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot encode {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Clone)]
pub struct OutputFiles {
    pub metrics: PathBuf,
    pub positions: PathBuf,
    pub resolved: PathBuf,
    pub error: Option<PathBuf>,
}

/// `%.9g`-style formatting.
pub fn format_number(value: f64) -> String {
    if value.is_nan() {
        return "NaN".into();
    }
    if value.is_infinite() {
        return if value > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if value == 0.0 {
        return "0".into();
    }
    let sci = format!("{value:.8e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format has an exponent");
    let exponent: i32 = exponent.parse().expect("exponent is an integer");
    if (-5..9).contains(&exponent) {
        let decimals = (8 - exponent).max(0) as usize;
        trim_zeros(format!("{value:.decimals$}"))
    } else {
        format!("{}e{exponent}", trim_zeros(mantissa.to_owned()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

fn opt(value: Option<f64>) -> String {
    format_number(value.unwrap_or(f64::NAN))
}

pub fn positions_header(robots: usize, dim: usize) -> Vec<String> {
    let mut header = vec!["t".to_owned()];
    for i in 1..=robots {
        for c in 1..=dim {
            header.push(format!("x_{i}_{c}"));
        }
    }
    header
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), OutputError> {
    let io_err = |source| OutputError::Io {
        path: path.to_owned(),
        source,
    };
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn csv_bytes<I, R>(path: &Path, header: &[String], rows: I) -> Result<Vec<u8>, OutputError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |source| OutputError::Csv {
        path: path.to_owned(),
        source,
    };
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.write_record(row).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| OutputError::Io {
        path: path.to_owned(),
        source: e.into_error(),
    })
}

pub fn metrics_csv(log: &TrajectoryLog) -> Result<Vec<u8>, OutputError> {
    let header: Vec<String> = METRICS_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = log.records.iter().map(|r| {
        vec![
            format_number(r.time),
            format_number(r.lambda2),
            format_number(r.min_distance),
            opt(r.h_connectivity),
            opt(r.h_safety_min),
            opt(r.locational_cost),
            opt(r.control.as_ref().map(|c| c.deformation)),
        ]
    });
    csv_bytes(Path::new(METRICS_FILE), &header, rows)
}

pub fn positions_csv(log: &TrajectoryLog) -> Result<Vec<u8>, OutputError> {
    let header = positions_header(log.robots, log.dim);
    let rows = log.records.iter().map(|r| {
        std::iter::once(format_number(r.time))
            .chain(r.positions.iter().map(|&v| format_number(v)))
            .collect::<Vec<_>>()
    });
    csv_bytes(Path::new(POSITIONS_FILE), &header, rows)
}

/// Writes the CSV files, the resolved scenario and, for failed runs, an error marker.
pub fn write_outputs(
    log: &TrajectoryLog,
    scenario: &ScenarioConfig,
    error: Option<&SimError>,
    out_dir: &Path,
) -> Result<OutputFiles, OutputError> {
    fs::create_dir_all(out_dir).map_err(|source| OutputError::Io {
        path: out_dir.to_owned(),
        source,
    })?;
    let files = OutputFiles {
        metrics: out_dir.join(METRICS_FILE),
        positions: out_dir.join(POSITIONS_FILE),
        resolved: out_dir.join(RESOLVED_FILE),
        error: error.map(|_| out_dir.join(ERROR_FILE)),
    };
    write_atomic(&files.metrics, &metrics_csv(log)?)?;
    write_atomic(&files.positions, &positions_csv(log)?)?;
    write_atomic(&files.resolved, resolved_scenario_toml(scenario).as_bytes())?;

    let marker = out_dir.join(ERROR_FILE);
    match error {
        Some(e) => {
            let step = e.step().map_or_else(|| "none".to_owned(), |s| s.to_string());
            let text = format!("step: {step}\nrecords: {}\nerror: {e}\n", log.records.len());
            write_atomic(&marker, text.as_bytes())?;
        }
        None if marker.exists() => {
            fs::remove_file(&marker).map_err(|source| OutputError::Io { path: marker, source })?;
        }
        None => {}
    }
    Ok(files)
}
