use std::path::PathBuf;

/// Failure cases shared across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// An argument violates a documented precondition (non-finite value,
    /// empty model, discount outside [0, 1), ...).
    #[error("invalid argument: {0}")]
    Invalid(String),
    /// Row `row` of a feature matrix has no finite entry, so no finite
    /// min-plus combination of the columns can cover that coordinate.
    #[error("projection undefined: row {row} of the feature matrix has no finite entry")]
    ProjectionUndefined { row: usize },
    /// An iterative solver hit its iteration cap before meeting its tolerance.
    #[error("no convergence after {} iterations (last residual {:.3e})", .0.iterations, .0.residual)]
    Convergence(Box<ConvergenceFailure>),
    /// A least-squares basis or its Gram matrix is not full column rank.
    #[error("rank-deficient basis: {0}")]
    RankDeficient(String),
    /// Numerical failure outside a plain iteration cap (singular solve,
    /// residual check failed after a direct solve, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// A quantity that is provably bounded came out the other side; indicates
    /// a broken input or a bug rather than a recoverable condition.
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
}

/// Diagnostic payload carried by [`Error::Convergence`]: the iterate the
/// solver stopped at and the full residual trace.
#[derive(Debug, Clone)]
pub struct ConvergenceFailure {
    pub iterations: usize,
    pub residual: f64,
    pub last_iterate: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl Error {
    pub(crate) fn convergence(
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
        residuals: Vec<f64>,
    ) -> Self {
        Error::Convergence(Box::new(ConvergenceFailure {
            iterations,
            residual,
            last_iterate,
            residuals,
        }))
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
