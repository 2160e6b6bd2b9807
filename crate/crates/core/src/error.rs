use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid order p = {0}: 2p must be a positive integer")]
    InvalidOrder(f64),

    #[error("set is not hierarchical: {0}")]
    NotHierarchical(String),

    #[error("operation undefined for the empty multi-index")]
    EmptyMultiIndex,

    #[error("multi-index {index} not admissible: {reason}")]
    InvalidIndex { index: String, reason: String },

    #[error("truncation level must be positive when approximate integrals are requested")]
    InvalidTruncation,

    #[error("missing integral entry {0}")]
    MissingIntegral(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("singular matrix")]
    Singular,

    #[error("non-finite input")]
    NonFinite,

    #[error("matrices {left} and {right} do not commute")]
    NonCommuting { left: String, right: String },

    #[error("degenerate exact-solution denominator {0:e}")]
    DegeneratePath(f64),

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonFailed { iterations: usize, residual: f64 },

    #[error("step {step} failed: {source}")]
    StepFailed {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("pole: {0}")]
    Pole(String),

    #[error("2 Re(lambda) + |sigma|^2 = {0} >= 0: the test equation is not mean-square stable")]
    NotMeanSquareStable(f64),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Failures of the numerics themselves, as opposed to rejected input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular
                | Error::NonFinite
                | Error::DegeneratePath(_)
                | Error::NewtonFailed { .. }
                | Error::StepFailed { .. }
                | Error::Pole(_)
                | Error::Consistency(_)
        )
    }
}
