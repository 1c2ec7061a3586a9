use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use super::output::{format_number, write_outputs};
use super::scenario_file::parse_scenario;
use crate::simulator::{run_scenario, ScenarioConfig, ScenarioFailure, TrajectoryLog};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Environment variable consulted when `-o` is not given.
pub const OUT_DIR_ENV: &str = "CONNCBF_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "conncbf", version, about = "Connectivity-preserving CBF filter for multi-robot teams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write metrics.csv, positions.csv and the resolved scenario.
    Run {
        scenario: PathBuf,
        #[arg(short = 'o', long = "out", env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Run a scenario twice with a barrier toggled and print a side-by-side summary.
    Compare {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        toggle: Toggle,
        #[arg(short = 'o', long = "out", env = OUT_DIR_ENV)]
        out: Option<PathBuf>,
    },
    /// Validate a scenario file without running it.
    Check { scenario: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    /// Connectivity barrier enabled vs disabled.
    Connectivity,
    /// Global connectivity barrier vs per-link barriers on the initial edges.
    #[value(name = "local_link", alias = "local-link")]
    LocalLink,
}

/// Outcome of one variant in a comparison.
#[derive(Debug, Clone)]
pub struct VariantSummary {
    pub label: &'static str,
    pub final_lambda2: f64,
    pub min_lambda2: f64,
    pub final_cost: Option<f64>,
    pub min_distance: f64,
    pub error: Option<String>,
}

impl VariantSummary {
    fn from_outcome(label: &'static str, outcome: &Result<TrajectoryLog, ScenarioFailure>) -> Self {
        let (log, error) = match outcome {
            Ok(log) => (Some(log), None),
            Err(f) => (f.log.as_ref(), Some(f.error.to_string())),
        };
        match log {
            Some(log) if !log.records.is_empty() => Self {
                label,
                final_lambda2: log.last().lambda2,
                min_lambda2: log.min_lambda2(),
                final_cost: log.last().locational_cost,
                min_distance: log.min_distance(),
                error,
            },
            _ => Self {
                label,
                final_lambda2: f64::NAN,
                min_lambda2: f64::NAN,
                final_cost: None,
                min_distance: f64::NAN,
                error,
            },
        }
    }
}

/// The two scenario variants of a comparison, labelled.
pub fn comparison_variants(base: &ScenarioConfig, toggle: Toggle) -> [(&'static str, ScenarioConfig); 2] {
    let mut first = base.clone();
    let mut second = base.clone();
    match toggle {
        Toggle::Connectivity => {
            first.constraints.connectivity = true;
            second.constraints.connectivity = false;
            [("h_enabled", first), ("h_disabled", second)]
        }
        Toggle::LocalLink => {
            first.constraints.connectivity = true;
            first.constraints.local_link = false;
            second.constraints.connectivity = false;
            second.constraints.local_link = true;
            [("global", first), ("local_link", second)]
        }
    }
}

pub fn format_summary(epsilon: f64, rows: &[VariantSummary]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<12} {:>14} {:>14} {:>14} {:>14}  status",
        "variant", "final_lambda2", "min_lambda2", "final_H", "min_dist"
    );
    for r in rows {
        let status = match &r.error {
            None if r.min_lambda2 >= epsilon => "ok (lambda2 >= epsilon throughout)".to_owned(),
            None if r.final_lambda2 <= 1e-9 => "ok (disconnected)".to_owned(),
            None => "ok".to_owned(),
            Some(e) => format!("failed: {e}"),
        };
        let _ = writeln!(
            out,
            "{:<12} {:>14} {:>14} {:>14} {:>14}  {status}",
            r.label,
            format_number(r.final_lambda2),
            format_number(r.min_lambda2),
            r.final_cost.map_or_else(|| "-".to_owned(), format_number),
            format_number(r.min_distance),
        );
    }
    out
}

fn summary_csv(rows: &[VariantSummary]) -> String {
    let mut out = String::from("variant,final_lambda2,min_lambda2,final_H,min_dist,error\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.label,
            format_number(r.final_lambda2),
            format_number(r.min_lambda2),
            format_number(r.final_cost.unwrap_or(f64::NAN)),
            format_number(r.min_distance),
            r.error.as_deref().unwrap_or("").replace([',', '\n'], " "),
        );
    }
    out
}

fn default_out_dir(scenario: &ScenarioConfig) -> PathBuf {
    Path::new("out").join(&scenario.name)
}

fn emit(
    outcome: &Result<TrajectoryLog, ScenarioFailure>,
    scenario: &ScenarioConfig,
    dir: &Path,
) -> Result<(), i32> {
    let (log, error) = match outcome {
        Ok(log) => (Some(log), None),
        Err(f) => (f.log.as_ref(), Some(&f.error)),
    };
    if let Some(log) = log {
        if let Err(e) = write_outputs(log, scenario, error, dir) {
            eprintln!("error: {e}");
            return Err(EXIT_RUNTIME);
        }
    }
    Ok(())
}

fn failure_code(f: &ScenarioFailure) -> i32 {
    if f.error.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_RUNTIME
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>) -> i32 {
    let scenario = match parse_scenario(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let outcome = run_scenario(&scenario);
    let dir = out.unwrap_or_else(|| default_out_dir(&scenario));
    if let Err(code) = emit(&outcome, &scenario, &dir) {
        return code;
    }
    match &outcome {
        Ok(log) => {
            let last = log.last();
            println!(
                "{}: {} steps, final lambda2 {}, min lambda2 {}, outputs in {}",
                scenario.name,
                log.records.len() - 1,
                format_number(last.lambda2),
                format_number(log.min_lambda2()),
                dir.display()
            );
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.error);
            failure_code(f)
        }
    }
}

fn cmd_compare(path: &Path, toggle: Toggle, out: Option<PathBuf>) -> i32 {
    let scenario = match parse_scenario(path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let mut rows = Vec::new();
    let mut code = EXIT_OK;
    for (label, variant) in comparison_variants(&scenario, toggle) {
        let outcome = run_scenario(&variant);
        if let Some(dir) = &out {
            if let Err(c) = emit(&outcome, &variant, &dir.join(label)) {
                return c;
            }
        }
        if let Err(f) = &outcome {
            code = code.max(failure_code(f));
        }
        rows.push(VariantSummary::from_outcome(label, &outcome));
    }
    print!("{}", format_summary(scenario.cbf.epsilon, &rows));
    if let Some(dir) = &out {
        let path = dir.join("summary.csv");
        if let Err(e) = std::fs::write(&path, summary_csv(&rows)) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_RUNTIME;
        }
    }
    code
}

fn cmd_check(path: &Path) -> i32 {
    match parse_scenario(path).and_then(|s| {
        // Placement problems (disconnected start, failed spawn) are validation errors too.
        crate::simulator::Simulator::new(s.clone()).map(|_| s).map_err(|source| {
            super::scenario_file::ConfigError::Invalid {
                origin: path.display().to_string(),
                source,
            }
        })
    }) {
        Ok(s) => {
            println!(
                "{}: ok ({} robots, {} steps of {} s)",
                s.name,
                s.robots,
                s.step_count(),
                format_number(s.dt)
            );
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VALIDATION
        }
    }
}

/// Parses `args` (program name first) and executes the subcommand.
pub fn cli_run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match cli.command {
        Command::Run { scenario, out } => cmd_run(&scenario, out),
        Command::Compare { scenario, toggle, out } => cmd_compare(&scenario, toggle, out),
        Command::Check { scenario } => cmd_check(&scenario),
    }
}
