use std::fmt;

use thiserror::Error;

use crate::scheduler::Objective;

/// Workflow stage in which an error was raised.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Repair,
    Schedule,
    Execute,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Phase::Repair => "repair",
            Phase::Schedule => "schedule",
            Phase::Execute => "execute",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: `{field}` {message}")]
    Config { field: String, message: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("infeasible problem: {0}")]
    Infeasible(String),

    #[error("numerical non-convergence: {message} (residual {residual:e})")]
    NonConvergence { message: String, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("unrecognized intent in {query:?}; available objectives: {}", list_objectives(.available))]
    UnrecognizedIntent {
        query: String,
        available: Vec<Objective>,
    },

    #[error("oracle instance too large: {count} assignments exceeds the limit of {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("{phase} phase failed: {source}")]
    Workflow {
        phase: Phase,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn list_objectives(list: &[Objective]) -> String {
    list.iter()
        .map(|o| o.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn in_phase(self, phase: Phase) -> Self {
        Error::Workflow {
            phase,
            source: Box::new(self),
        }
    }

    /// The innermost error, looking through workflow phase tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Workflow { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
