use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("eigenvalue iteration did not converge after {iterations} QR sweeps")]
    ConvergenceFailure { iterations: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e} after jitter {jitter:e})")]
    NotPositiveDefinite { pivot: usize, value: f64, jitter: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported matrix dimension {0} (supported: 2..=64)")]
    UnsupportedDimension(usize),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("matrix declared symmetric but entry ({row}, {col}) differs from its transpose by {delta:e}")]
    SymmetryViolation { row: usize, col: usize, delta: f64 },

    #[error("eigensolver failed at orbit angle index {index}: {source}")]
    AtAngle {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid orbit: {0}")]
    InvalidOrbit(String),

    #[error("zero vector in cosine distance")]
    ZeroVector,

    #[error("ambiguous path continuation at angle index {angle}: two candidates tie at distance {distance:e}")]
    AmbiguousAssignment { angle: usize, distance: f64 },

    #[error("orbit under-resolved at angle index {angle}: a step moved closer to another path than to its own")]
    TooSparse { angle: usize },

    #[error("feature vectors are required for the cosine metric")]
    MissingFeatures,

    #[error("pair {0} is not an exchanging pair")]
    NotExchanging(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero predictive variance for target {0}")]
    ZeroVariance(&'static str),

    #[error("no root found: best residual {residual:e} at ({re}, {im})")]
    NoRootFound { re: f64, im: f64, residual: f64 },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse { context: context.into(), message: message.to_string() }
    }
}
