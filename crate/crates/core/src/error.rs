use std::path::PathBuf;

use thiserror::Error;

use crate::evolution::SimState;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A single problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.key.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.key, self.message)
        }
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid configuration: {}", join_issues(.0))]
    ConfigIssues(Vec<ConfigIssue>),

    /// A structural assumption on the model data does not hold on the sampled range.
    #[error("assumption {inequality} violated: {detail}")]
    Assumption {
        inequality: &'static str,
        detail: String,
    },

    #[error("{solver} did not converge in {iterations} iterations (relative residual {residual:e})")]
    Solver {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },

    #[error("time step underflow at t = {t:e}: dt = {dt:e} below dt_min = {dt_min:e}")]
    StepFailure {
        t: f64,
        dt: f64,
        dt_min: f64,
        state: Box<SimState>,
    },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("bad file format in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("checkpoint mismatch: {0}")]
    Mismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver { .. } | Error::StepFailure { .. } => 3,
            _ => 2,
        }
    }
}
