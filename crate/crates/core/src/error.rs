//! Error type shared across the library.

use thiserror::Error;

/// Failures surfaced by oracles, solvers, and parsers.
///
/// Contract violations (out-of-range sketch indices, dimension mismatches
/// between pre-validated arguments) panic instead: they indicate a bug in the
/// caller, not a recoverable condition.
#[derive(Debug, Error)]
pub enum Error {
    /// A run or sampler configuration is inconsistent with the problem.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// The model being minimized has no finite minimizer.
    #[error("cubic model is unbounded below: {0}")]
    UnboundedModel(String),

    /// An iterative procedure failed to reach its tolerance or overflowed
    /// its safeguard (root finder cap, line-search doubling cap, singular solve).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The operation is not defined for the given combination of inputs.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A data file could not be parsed. `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
