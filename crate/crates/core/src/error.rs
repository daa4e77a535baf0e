use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Conjugate gradients hit `max_iter`; carries the best iterate seen.
    #[error("cg did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    CgNotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("eigensolver did not converge after {iterations} iterations (rayleigh quotient {estimate}, residual {residual:.3e})")]
    EigenNotConverged {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("singular matrix encountered at pivot {0}")]
    Singular(usize),

    /// Newton failed; `last` is the final iterate.
    #[error("newton failed after {iterations} iterations: {reason} (residual {residual:.3e})")]
    NewtonFailed {
        reason: String,
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    /// Deflated residual evaluated at one of the deflated roots.
    #[error("deflated residual evaluated at a known root (index {0})")]
    DeflationDomain(usize),

    /// A checkable hypothesis of the model problem does not hold.
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    /// A constructive search came up empty. Not evidence against existence.
    #[error("search failure: {0}")]
    SearchFailure(String),

    #[error("config error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },

    #[error("config error for key `{key}`: {message}")]
    ConfigValue { key: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status for the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Hypothesis(_) => 2,
            Error::SearchFailure(_) => 3,
            _ => 1,
        }
    }
}
