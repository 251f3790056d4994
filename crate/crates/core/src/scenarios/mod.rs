//! Declarative scenarios: config files, built-in presets, the runner and reports.

mod config;
mod mehler;
mod report;
mod run;

pub use config::{builtin, is_ou, load_config, DomainKind, Experiment, InitialSpec, ScenarioConfig, SpaceBlock, TimeBlock, BUILTINS, CONFIG_VERSION};
pub use mehler::mehler_reference;
pub use report::{emit_report, load_results, markdown, metrics_csv, unix_now, write_atomic, ReportFormat, RunManifest, CSV_HEADER};
pub use run::{run_scenario, Artifact, ExperimentResult, Metric, ScenarioResult};
