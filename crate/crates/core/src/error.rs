//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A generator or parameter specification is invalid.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    /// CSV parsing failed; the message names the offending row/column.
    #[error("parse error: {0}")]
    Parse(String),

    /// Not enough points to sample the requested number of anchors.
    #[error("insufficient data: need at least {needed} points, have {available}")]
    InsufficientData { needed: usize, available: usize },

    /// The data has fewer distinct points than anchors requested.
    #[error("degenerate data: fewer than {needed} distinct points")]
    DegenerateData { needed: usize },

    /// Vector/matrix dimensions do not match.
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    /// An operation over a cluster received an empty point set.
    #[error("empty cluster: {0}")]
    EmptyCluster(String),

    /// Threshold chaining produced fewer components than clusters requested.
    #[error("Parameter tau is set too small ! ({components} chained components < k = {k})")]
    TauTooSmall { components: usize, k: usize },

    /// The argmax assignment left a seed group with no members.
    #[error("degenerate assignment: group {group} received no points")]
    DegenerateAssignment { group: usize },

    /// Every parameter combination in a tuning grid failed.
    #[error("all {0} parameter combinations failed:\n{1}")]
    AllFailed(usize, String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
