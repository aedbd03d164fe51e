//! Closed-loop evaluation: ADE/FDE, scenario enumeration, experiments, reports.

pub mod experiment;
pub mod metrics;
pub mod report;
pub mod scenario;
pub mod synthetic;

use thiserror::Error;

pub use experiment::{run_experiment, ExperimentConfig};
pub use metrics::{ade, fde};
pub use report::{
    emit_report, improvement, mean_improvement, render_report, ArmReport, HorizonMetrics, Metric, MetricReport,
    ReportFormat, REPORT_SCHEMA_VERSION,
};
pub use scenario::{enumerate_scenarios, Scenario, ScenarioConfig};
pub use synthetic::{constant_velocity_store, ring_scene, SyntheticConfig};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("trajectory lengths differ: {pred} predicted vs {gt} ground truth")]
    LengthMismatch { pred: usize, gt: usize },
    #[error("trajectories are empty")]
    EmptyTrajectory,
    #[error("no scenario satisfies the history and horizon requirements")]
    NoScenarios,
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
