//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the crate, from precondition
/// violations in the matrix kernel up to data-ingestion failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("negative rank-1 weight c = {c}")]
    NegativeWeight { c: f64 },

    #[error("matrix not symmetric (max asymmetry {max_asym:e})")]
    NotSymmetric { max_asym: f64 },

    #[error("matrix singular to tolerance: condition estimate {cond:e} exceeds cap {cap:e}")]
    Singular { cond: f64, cap: f64 },

    #[error("matrix not positive definite")]
    NotPositiveDefinite,

    #[error("invalid hybrid weights alpha={alpha}, beta={beta}: {reason}")]
    InvalidWeights { alpha: f64, beta: f64, reason: &'static str },

    #[error("invalid truncation schedule: {0}")]
    InvalidSchedule(String),

    #[error("non-finite state at step {step}: {context}")]
    NonFiniteState { step: u64, context: String },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {replication} failed: {source}")]
    ReplicationFailed {
        replication: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "batch Newton did not converge within {max_iter} iterations \
         (final gradient norm {grad_norm:e})"
    )]
    NoConvergence { max_iter: usize, grad_norm: f64 },

    #[error("empty {what}")]
    Empty { what: &'static str },

    #[error("missing column {name:?}")]
    MissingColumn { name: String },

    #[error("unparseable cell at row {row}, column {column:?}: {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("diagnostic precondition violated: {0}")]
    DiagnosticPrecondition(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error raised while consuming the sample with 1-based index
    /// `step`, so stream failures always carry their iteration.
    pub fn at_step(self, step: u64) -> Error {
        match self {
            Error::NonFiniteState { .. } | Error::StepFailed { .. } => self,
            other => Error::StepFailed {
                step,
                source: Box::new(other),
            },
        }
    }
}
