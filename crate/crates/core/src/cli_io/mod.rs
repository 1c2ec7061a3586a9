//! Scenario files, CSV outputs and the command-line front end.

mod cli;
mod output;
mod scenario_file;

pub use cli::{
    cli_run, comparison_variants, format_summary, Toggle, VariantSummary, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION,
    OUT_DIR_ENV,
};
pub use output::{
    format_number, metrics_csv, positions_csv, positions_header, write_outputs, OutputError, OutputFiles, ERROR_FILE,
    METRICS_FILE, METRICS_HEADER, POSITIONS_FILE, RESOLVED_FILE,
};
pub use scenario_file::{
    defaults, parse_scenario, parse_scenario_str, resolved_scenario_toml, CbfSection, ConfigError, ConstraintSection,
    ControllerSection, GraphSection, InitialSection, ScenarioFile, SpawnSection, FORMAT_VERSION,
};
