//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// Structurally invalid circuit, bad units, bad references.
    #[error("invalid circuit: {0}")]
    Invalid(String),
    /// Bad caller input that is not part of the netlist (truncations, grids, states).
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("topology: {0}")]
    Topology(String),
    #[error("transformation: {0}")]
    Transform(String),
    #[error("eigensolver did not converge after {iterations} iterations (max residual {max_residual:e})")]
    NonConvergence {
        iterations: usize,
        residuals: Vec<f64>,
        max_residual: f64,
    },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("sweep point {index}: {source}")]
    Sweep {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True when the error stems from user input rather than a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Syntax { .. } | Error::Invalid(_) | Error::Argument(_) | Error::Topology(_) => {
                true
            }
            Error::Sweep { source, .. } => source.is_input_error(),
            _ => false,
        }
    }

    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            line,
            column,
            message: message.into(),
        }
    }
}
