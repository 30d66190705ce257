//! Configuration, trace files, plots and comparison reports around
//! `smmc-core`.

pub mod config;
pub mod plot;
pub mod report;
pub mod trace_csv;

pub use config::{parse_config, ConfigError, Mode, RunConfig};
pub use report::{compare_controllers, run_single, ComparisonReport, ReportError, VerdictStatus};
pub use trace_csv::{read_trace_csv, write_trace_csv};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "SMMC_OUT_DIR";
