//! Experiment harness: built-in and generated workloads, configuration,
//! and the parallel policy grid that produces metric reports.

mod config;
mod experiment;
mod generate;
mod workloads;

pub use config::{parse_size, ExperimentConfig, SweepPoint, WorkloadSelector, CONFIG_KEYS, ENV_PREFIX};
pub use experiment::{oracle_check, resolve_workloads, run_experiment, ExperimentReport, ReportRow, RowResult};
pub use generate::{generate, MAX_SIZE};
pub use workloads::{
    branchy, branchy_counts, builtin, builtin_workloads, loopless_straightline, mixed, pointer_chase, redundant_loop,
    varying_loop, varying_value, Tag, Workload, BUILTIN_NAMES, CHASE_BASE, LCG_ADD, LCG_MUL, REDUNDANT_STEP,
    VARYING_BASE,
};

use crate::metrics::MetricError;
use crate::reuse::PolicyError;
use crate::timing::SimError;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown workload kind `{0}`")]
    UnknownKind(String),
    #[error("unknown workload `{0}`")]
    UnknownWorkload(String),
    #[error("workload {0}: {1}")]
    WorkloadCheck(String, String),
    #[error("generated size {0} out of range 1..={MAX_SIZE}")]
    GenerateSize(u32),
    #[error("generated workload {0}: {1}")]
    Generated(String, String),
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    ConfigSyntax { line: usize, text: String },
    #[error("config key `{key}` = `{value}`: {reason}")]
    ConfigValue { key: String, value: String, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("workload {workload} under {policy}: {source}")]
    Sim { workload: String, policy: String, source: SimError },
    #[error("workload {workload}: {source}")]
    Metric { workload: String, source: MetricError },
    #[error(transparent)]
    Aggregate(#[from] MetricError),
}
