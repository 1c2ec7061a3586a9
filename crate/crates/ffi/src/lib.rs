//! C ABI for the `conncbf` filter and simulator.
//!
//! Scenarios and trajectory logs are opaque handles created by this library
//! and released with the matching `*_free` function. Every fallible call
//! returns a [`ConncbfStatus`]; on anything other than
//! `CONNCBF_STATUS_OK` a description is available from
//! [`conncbf_last_error_message`] until the next call on the same thread.
//! Panics never cross the boundary; they are reported as
//! `CONNCBF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use conncbf::cbf_qp::{connectivity_constraint, safety_constraints, solve_cbf_qp, CbfParams, QpError};
use conncbf::cli_io::{parse_scenario, parse_scenario_str, write_outputs};
use conncbf::graph_topology::{build_spectral_graph, connectivity_gradient, Configuration, GraphParams};
use conncbf::simulator::{run_scenario, ScenarioConfig, SimError, TrajectoryLog};
use nalgebra::DVector;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConncbfStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A numeric argument was out of range or a string was not UTF-8.
    InvalidArgument = 2,
    /// The scenario file or text failed validation.
    InvalidScenario = 3,
    /// Reading or writing files failed.
    Io = 4,
    /// The simulation stopped early; a partial log may still be returned.
    RunFailed = 5,
    /// The constraint set of the filter has no feasible point.
    Infeasible = 6,
    Panic = 7,
}

/// Validated scenario.
pub struct ConncbfScenario {
    inner: ScenarioConfig,
}

/// Trajectory log of a finished or aborted run.
pub struct ConncbfLog {
    log: TrajectoryLog,
    error: Option<SimError>,
}

/// Parameters of `conncbf_filter_velocity`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ConncbfFilterParams {
    /// Communication radius R, meters.
    pub comm_radius: f64,
    /// Connectivity threshold ε on λ₂.
    pub epsilon: f64,
    /// Gain of the linear class-K function of the connectivity barrier.
    pub phi: f64,
    /// Minimum pairwise distance, meters; used only when `safety` is true.
    pub d_min: f64,
    /// Gain of the safety barriers.
    pub gain_safety: f64,
    /// Add pairwise collision-avoidance rows to the filter.
    pub safety: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs were removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

type Failure = (ConncbfStatus, String);

fn fail<T>(status: ConncbfStatus, message: impl Into<String>) -> Result<T, Failure> {
    Err((status, message.into()))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<ConncbfStatus, Failure>) -> ConncbfStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err((status, message))) => {
            set_last_error(message);
            status
        }
        Err(panic) => {
            let what = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("internal error: {what}"));
            ConncbfStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        fail(ConncbfStatus::NullPointer, format!("{name} is null"))
    } else {
        Ok(())
    }
}

unsafe fn utf8<'a>(s: *const c_char, name: &str) -> Result<&'a str, Failure> {
    non_null(s, name)?;
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| (ConncbfStatus::InvalidArgument, format!("{name} is not valid UTF-8")))
}

unsafe fn configuration(positions: *const f64, robots: usize, dim: usize) -> Result<Configuration, Failure> {
    non_null(positions, "positions")?;
    let len = robots
        .checked_mul(dim)
        .ok_or((ConncbfStatus::InvalidArgument, "robots * dim overflows".to_owned()))?;
    let state = std::slice::from_raw_parts(positions, len).to_vec();
    Configuration::new(dim, state).map_err(|e| (ConncbfStatus::InvalidArgument, e.to_string()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn conncbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Description of the last failure on this thread, or NULL. The pointer is
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn conncbf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads and validates a scenario file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conncbf_scenario_from_file(path: *const c_char, out: *mut *mut ConncbfScenario) -> ConncbfStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let path = utf8(path, "path")?;
        let inner = parse_scenario(Path::new(path)).map_err(|e| {
            let status = match e {
                conncbf::cli_io::ConfigError::Io { .. } => ConncbfStatus::Io,
                _ => ConncbfStatus::InvalidScenario,
            };
            (status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(ConncbfScenario { inner }));
        Ok(ConncbfStatus::Ok)
    })
}

/// Parses and validates scenario TOML held in memory.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conncbf_scenario_from_toml(text: *const c_char, out: *mut *mut ConncbfScenario) -> ConncbfStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        let text = utf8(text, "text")?;
        let inner = parse_scenario_str(text, "<memory>").map_err(|e| (ConncbfStatus::InvalidScenario, e.to_string()))?;
        *out = Box::into_raw(Box::new(ConncbfScenario { inner }));
        Ok(ConncbfStatus::Ok)
    })
}

/// # Safety
/// `scenario` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conncbf_scenario_free(scenario: *mut ConncbfScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Number of robots and of integration steps of a scenario.
///
/// # Safety
/// `scenario` must be a live handle; `robots` and `steps` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn conncbf_scenario_size(
    scenario: *const ConncbfScenario,
    robots: *mut usize,
    steps: *mut usize,
) -> ConncbfStatus {
    guard(|| {
        non_null(scenario, "scenario")?;
        non_null(robots, "robots")?;
        non_null(steps, "steps")?;
        let s = &(*scenario).inner;
        *robots = s.robots;
        *steps = s.step_count();
        Ok(ConncbfStatus::Ok)
    })
}

/// Runs a scenario to its horizon.
///
/// On `CONNCBF_STATUS_RUN_FAILED` the records up to the failing step are
/// still returned through `out` and must be freed. On any other failure
/// `*out` is NULL.
///
/// # Safety
/// `scenario` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conncbf_run(scenario: *const ConncbfScenario, out: *mut *mut ConncbfLog) -> ConncbfStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        non_null(scenario, "scenario")?;
        match run_scenario(&(*scenario).inner) {
            Ok(log) => {
                *out = Box::into_raw(Box::new(ConncbfLog { log, error: None }));
                Ok(ConncbfStatus::Ok)
            }
            Err(failure) => {
                let message = failure.error.to_string();
                if failure.error.is_validation() {
                    return fail(ConncbfStatus::InvalidScenario, message);
                }
                if let Some(log) = failure.log {
                    *out = Box::into_raw(Box::new(ConncbfLog {
                        log,
                        error: Some(failure.error),
                    }));
                }
                fail(ConncbfStatus::RunFailed, message)
            }
        }
    })
}

/// # Safety
/// `log` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn conncbf_log_free(log: *mut ConncbfLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Number of records (steps + 1 for a complete run).
///
/// # Safety
/// `log` must be a live handle and `len` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn conncbf_log_len(log: *const ConncbfLog, len: *mut usize) -> ConncbfStatus {
    guard(|| {
        non_null(log, "log")?;
        non_null(len, "len")?;
        *len = (*log).log.records.len();
        Ok(ConncbfStatus::Ok)
    })
}

/// Copies up to `capacity` values of λ₂, one per record, into `buffer`
/// and stores the number copied in `written`.
///
/// # Safety
/// `buffer` must hold `capacity` doubles; the other pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn conncbf_log_lambda2(
    log: *const ConncbfLog,
    buffer: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> ConncbfStatus {
    guard(|| {
        non_null(log, "log")?;
        non_null(written, "written")?;
        let records = &(*log).log.records;
        let n = records.len().min(capacity);
        if n > 0 {
            non_null(buffer, "buffer")?;
            let dst = std::slice::from_raw_parts_mut(buffer, n);
            for (d, r) in dst.iter_mut().zip(records) {
                *d = r.lambda2;
            }
        }
        *written = n;
        Ok(ConncbfStatus::Ok)
    })
}

/// Copies the stacked positions of record `step` (robot-major, `N * n`
/// values) into `buffer`, which must hold at least that many doubles.
///
/// # Safety
/// `buffer` must hold `capacity` doubles and `log` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn conncbf_log_positions(
    log: *const ConncbfLog,
    step: usize,
    buffer: *mut f64,
    capacity: usize,
) -> ConncbfStatus {
    guard(|| {
        non_null(log, "log")?;
        non_null(buffer, "buffer")?;
        let records = &(*log).log.records;
        let Some(record) = records.get(step) else {
            return fail(
                ConncbfStatus::InvalidArgument,
                format!("step {step} out of range (log has {} records)", records.len()),
            );
        };
        let src = record.positions.as_slice();
        if capacity < src.len() {
            return fail(
                ConncbfStatus::InvalidArgument,
                format!("buffer holds {capacity} values, {} needed", src.len()),
            );
        }
        std::slice::from_raw_parts_mut(buffer, src.len()).copy_from_slice(src);
        Ok(ConncbfStatus::Ok)
    })
}

/// Writes `metrics.csv`, `positions.csv`, `resolved_scenario.toml` and, for
/// aborted runs, `error.txt` into `dir`, creating it if needed.
///
/// # Safety
/// `log` and `scenario` must be live handles; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn conncbf_log_write_outputs(
    log: *const ConncbfLog,
    scenario: *const ConncbfScenario,
    dir: *const c_char,
) -> ConncbfStatus {
    guard(|| {
        non_null(log, "log")?;
        non_null(scenario, "scenario")?;
        let dir = utf8(dir, "dir")?;
        let log = &*log;
        write_outputs(&log.log, &(*scenario).inner, log.error.as_ref(), Path::new(dir))
            .map_err(|e| (ConncbfStatus::Io, e.to_string()))?;
        Ok(ConncbfStatus::Ok)
    })
}

/// λ₂ of the proximity graph of `robots` points in `dim` dimensions with
/// the default edge-weight scale for `comm_radius`.
///
/// # Safety
/// `positions` must hold `robots * dim` doubles; `lambda2` must be valid.
#[no_mangle]
pub unsafe extern "C" fn conncbf_algebraic_connectivity(
    positions: *const f64,
    robots: usize,
    dim: usize,
    comm_radius: f64,
    lambda2: *mut f64,
) -> ConncbfStatus {
    guard(|| {
        non_null(lambda2, "lambda2")?;
        let config = configuration(positions, robots, dim)?;
        let params = GraphParams::new(comm_radius);
        let graph = build_spectral_graph(&config, &params).map_err(|e| (ConncbfStatus::InvalidArgument, e.to_string()))?;
        *lambda2 = graph.lambda2;
        Ok(ConncbfStatus::Ok)
    })
}

/// Filters one desired team velocity through the connectivity barrier
/// (and, if enabled, pairwise safety barriers). `u_des` and `u_out` hold
/// `robots * dim` doubles each and may not alias.
///
/// # Safety
/// All pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn conncbf_filter_velocity(
    positions: *const f64,
    robots: usize,
    dim: usize,
    u_des: *const f64,
    params: *const ConncbfFilterParams,
    u_out: *mut f64,
) -> ConncbfStatus {
    guard(|| {
        non_null(u_des, "u_des")?;
        non_null(params, "params")?;
        non_null(u_out, "u_out")?;
        let p = *params;
        let config = configuration(positions, robots, dim)?;
        let len = config.state().len();
        let desired = DVector::from_column_slice(std::slice::from_raw_parts(u_des, len));

        let invalid = |e: &dyn std::fmt::Display| (ConncbfStatus::InvalidArgument, e.to_string());
        let graph_params = GraphParams::new(p.comm_radius);
        graph_params.validate().map_err(|e| invalid(&e))?;
        let mut cbf = CbfParams::new(p.epsilon, p.d_min);
        cbf.phi = p.phi;
        cbf.gain_safety = p.gain_safety;
        if !(p.epsilon > 0.0 && p.phi > 0.0) || (p.safety && !(p.d_min > 0.0 && p.gain_safety > 0.0)) {
            return fail(ConncbfStatus::InvalidArgument, "epsilon, phi, d_min and gain_safety must be positive");
        }

        let graph = build_spectral_graph(&config, &graph_params).map_err(|e| invalid(&e))?;
        let beta = connectivity_gradient(&config, &graph, &graph_params).map_err(|e| invalid(&e))?;
        let mut rows = vec![connectivity_constraint(&beta, graph.lambda2, &cbf).map_err(|e| invalid(&e))?];
        if p.safety {
            rows.extend(safety_constraints(&config, &cbf));
        }
        let solution = solve_cbf_qp(&desired, &rows).map_err(|e| match e {
            QpError::Infeasible { .. } => (ConncbfStatus::Infeasible, e.to_string()),
            other => (ConncbfStatus::InvalidArgument, other.to_string()),
        })?;
        std::slice::from_raw_parts_mut(u_out, len).copy_from_slice(solution.u.as_slice());
        Ok(ConncbfStatus::Ok)
    })
}
