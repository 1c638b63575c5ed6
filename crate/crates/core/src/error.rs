use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter or configuration values that violate a model constraint.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An integral that does not exist for the requested parameters.
    #[error("divergent {quantity}: {reason}")]
    Divergent { quantity: &'static str, reason: String },

    #[error("quadrature did not converge for {what} (estimate {estimate:e}, error {error:e})")]
    Quadrature { what: String, estimate: f64, error: f64 },

    #[error("covariance matrix is not positive semidefinite: eigenvalue {eigenvalue:e} below tolerance {tolerance:e}")]
    NotPsd { eigenvalue: f64, tolerance: f64 },

    #[error("damping term became positive ({value:e}) at product-grid index {index}")]
    PositiveDamping { value: f64, index: usize },

    #[error("L2 norm drift {drift:e} at step {step} (z = {z}) exceeds {limit:e}")]
    NormDrift { step: usize, z: f64, drift: f64, limit: f64 },

    #[error("z = {z} maps to medium coordinate {t} outside the stack extent [{start}, {end})")]
    StackExhausted { z: f64, t: f64, start: f64, end: f64 },

    #[error("screen stack too short for eps = {eps}: need nz >= {required}, have {available}")]
    UnderResolved { eps: f64, required: usize, available: usize },

    #[error("boundary energy fraction {fraction:e} exceeds {limit:e}: {what}")]
    BoundaryTail { what: &'static str, fraction: f64, limit: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("insufficient ensemble: {have} realizations, need at least {need}")]
    InsufficientEnsemble { have: usize, need: usize },

    #[error("realization {realization} (seed {seed}) failed: {source}")]
    Worker {
        realization: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code: 2 for configuration problems, 3 for numerical
    /// invariant violations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Divergent { .. } | Error::UnderResolved { .. } | Error::BoundaryTail { .. } | Error::Json(_) => 2,
            Error::Quadrature { .. }
            | Error::NotPsd { .. }
            | Error::PositiveDamping { .. }
            | Error::NormDrift { .. }
            | Error::StackExhausted { .. }
            | Error::NonFinite(_)
            | Error::InsufficientEnsemble { .. } => 3,
            Error::Worker { source, .. } => source.exit_code(),
            Error::Format(_) | Error::Io(_) => 1,
        }
    }
}
