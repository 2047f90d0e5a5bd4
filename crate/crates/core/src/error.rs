use thiserror::Error;

/// Errors raised by the simulator and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid truncation: {0}")]
    Truncation(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("quadrature order {order} too small for degree {degree} (need at least {required})")]
    QuadratureOrder {
        order: usize,
        degree: usize,
        required: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The density `1 + rho` is not positive somewhere on the physical grid.
    #[error("nonpositive density: min(1 + rho) = {min_density:e} at grid point {index}")]
    NonpositiveDensity { min_density: f64, index: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("eigenvalue computation failed: {0}")]
    Eigen(String),

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("gap certificate failed: lambda = {0}")]
    Certificate(f64),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
