//! Scenario definitions, the closed-loop runner, metrics, batch execution
//! and artifact output.

mod artifacts;
mod batch;
mod format;
mod metrics;
mod scenario;
mod sim;
mod trace;

use thiserror::Error;

pub use artifacts::{emit_artifacts, rope_asymmetry, rope_svg, trajectory_svg, turn_window, write_paths_csv, ArtifactPaths};
pub use batch::{parse_seed_range, run_batch, seed_sweep, steer_suite, BatchReport, BatchRun, KindSummary};
pub use format::{apply_override, parse_scenario, to_scenario_text, SCENARIO_MAGIC};
pub use metrics::{metrics_from_trace, RunMetrics};
pub use scenario::{
    hallway_world, obstacle_course_world, outdoor_route, outdoor_world, map_grid, rasterize, BaselineParams, NavParams, NoiseParams,
    PedestrianParams, ScenarioConfig, ScenarioKind, SensorParams, WalkerKind, WorldPreset, WorldSpec, STEER_TARGETS_DEG,
};
pub use sim::{meta_for, run_scenario, PathRecord, RunOutcome};
pub use trace::{Trace, TraceMeta, TraceRow, TRACE_COLUMNS, TRACE_MAGIC};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    ScenarioInvalid(String),
    #[error("run exceeded its duration cap")]
    TimedOut(Box<RunOutcome>),
    #[error("i/o failure: {0}")]
    IoFailure(String),
    #[error("scenario file line {line}: {reason}")]
    ScenarioParse { line: usize, reason: String },
    #[error("trace line {line}: {reason}")]
    TraceParse { line: usize, reason: String },
}

impl HarnessError {
    /// The run that produced this error, when it ran to its cap.
    pub fn outcome(&self) -> Option<&RunOutcome> {
        match self {
            HarnessError::TimedOut(o) => Some(o),
            _ => None,
        }
    }
}
