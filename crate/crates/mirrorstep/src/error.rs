use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A point left the domain of a distance-generating function
    /// (e.g. a nonpositive coordinate under the entropy map).
    #[error("domain violation: {0}")]
    Domain(String),

    /// An argument failed a precondition or consistency check.
    #[error("invalid argument: {0}")]
    Validation(String),

    /// A point that must lie in a feasible set does not.
    #[error("infeasible point: {0}")]
    Infeasible(String),

    /// A requested computation exceeds its cost budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// A text input could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// An I/O failure, tagged with the path involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A state the solver guarantees by construction was violated.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
