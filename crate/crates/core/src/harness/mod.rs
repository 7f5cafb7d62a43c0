//! Experiment orchestration: scenario configs, end-to-end runs, sweeps,
//! report files, and self-checks used by the CLI.

mod config;
mod plotdata;
mod report;
mod scenario;
pub mod selfcheck;
mod sweep;

pub use config::{AttackKind, DatasetSource, ModelConfig, PartitionConfig, ScenarioConfig, SwarmSettings};
pub use plotdata::{emit_plotdata, plotdata_csv, PlotPoint, PLOT_COLUMNS};
pub use report::{
    json_lines, verdicts_csv, write_atomic, write_outputs, AttackDetails, AttackerMetrics, ExperimentReport,
    ModelSummary, RoundSummary, VerdictRow, ARTIFACT_VERSION, REPORT_FILE, ROUNDS_FILE, SCHEMA_VERSION, TRACE_FILE,
    VERDICTS_FILE,
};
pub use scenario::{build_clients, client_architecture, load_dataset, partition_spec, run_scenario, ScenarioOutcome};
pub use sweep::{apply_axis, resolve_axis, sweep, write_sweep, SweepResult};
