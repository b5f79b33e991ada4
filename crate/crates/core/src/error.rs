use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quantile level {0} is outside (0, 1)")]
    InvalidLevel(f64),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("insufficient data: first predictable index is {first_predictable}, but only {available} rows are available")]
    InsufficientData {
        first_predictable: usize,
        available: usize,
    },

    #[error("insufficient history: {required} rows required, {available} available")]
    InsufficientHistory { required: usize, available: usize },

    #[error("conformity score undefined for a {0} interval")]
    ScoreUndefined(&'static str),

    #[error("warmup of {warmup} records exceeds the {available} records of group {group}")]
    WarmupTooLong {
        group: u32,
        warmup: usize,
        available: usize,
    },

    #[error("metric `{metric}` needs at least {required} records, got {available}")]
    TooFewRecords {
        metric: &'static str,
        required: usize,
        available: usize,
    },

    #[error("coefficient trace is only defined for HQR and HQR-W models")]
    UnsupportedDiagnostic,

    #[error(
        "linear program did not converge after {iterations} iterations (objective {objective})"
    )]
    SolverFailure { iterations: usize, objective: f64 },

    #[error("{path}: line {line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

/// Broad failure classes, used by the command-line driver to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidLevel(_)
            | Error::InvalidParameter { .. }
            | Error::UnsupportedDiagnostic => ErrorClass::Usage,
            Error::SolverFailure { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
