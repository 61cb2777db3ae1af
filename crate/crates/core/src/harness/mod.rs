//! Artifact I/O and experiment orchestration behind the CLI: JSONL traces,
//! CSV reports and curves, SVG figures, and the train/eval/compare runs.

pub mod run;
pub mod svg;
pub mod tables;
pub mod trace;

use std::path::Path;

use thiserror::Error;

use crate::eval::CompareError;
use crate::learner::LearnerError;
use crate::world::ConfigError;

pub use run::{
    method_name, resolve_out_dir, run_compare, run_eval, run_train, CompareOutput, EvalJob, EvalOutput, Subject,
    TrainJob, TrainRun, OUT_ENV,
};
pub use trace::{check_replay, read_trace, write_trace, ReplayCheck, TraceRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {detail}")]
    Malformed { path: String, line: usize, detail: String },
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn csv(path: &Path, e: csv::Error) -> Self {
        if e.is_io_error() {
            if let csv::ErrorKind::Io(source) = e.into_kind() {
                return HarnessError::io(path, source);
            }
            unreachable!("is_io_error implies an Io kind");
        }
        HarnessError::Malformed {
            path: path.display().to_string(),
            line: e.position().map_or(0, |p| p.line() as usize),
            detail: e.to_string(),
        }
    }

    /// 1 usage, 2 invalid input, 3 runtime or I/O failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Validation(_) | HarnessError::Malformed { .. } => 2,
            HarnessError::Runtime(_) | HarnessError::Io { .. } => 3,
        }
    }
}

impl From<ConfigError> for HarnessError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { path, source } => HarnessError::Io { path, source },
            other => HarnessError::Validation(other.to_string()),
        }
    }
}

impl From<LearnerError> for HarnessError {
    fn from(e: LearnerError) -> Self {
        match e {
            LearnerError::Io { path, source } => HarnessError::Io { path, source },
            e @ LearnerError::NonFinite { .. } => HarnessError::Runtime(e.to_string()),
            other => HarnessError::Validation(other.to_string()),
        }
    }
}

impl From<CompareError> for HarnessError {
    fn from(e: CompareError) -> Self {
        HarnessError::Validation(e.to_string())
    }
}
