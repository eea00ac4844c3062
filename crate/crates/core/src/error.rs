use thiserror::Error;

/// Errors raised across the estimation pipeline.
///
/// Every variant carries a stable [`Error::kind`] name so callers (notably the
/// CLI) can emit machine-readable failure lines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty point set")]
    EmptyInput,
    #[error("need at least {required} points, got {got}")]
    InsufficientPoints { required: usize, got: usize },
    #[error("query index {index} out of range for {n} points")]
    IndexError { index: usize, n: usize },
    #[error("invalid point set: {0}")]
    InvalidPoints(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid radius {0}")]
    InvalidRadius(f64),
    #[error("missing covariate/response at point {0}")]
    MissingData(usize),
    #[error("paired sample is empty")]
    EmptySample,
    #[error("need at least {required} couples, got {got}")]
    InsufficientCouples { required: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("closed-form system is singular at psi = {psi}")]
    SingularSystem { psi: f64 },
    #[error("variance estimate {0} is not positive")]
    DegenerateVariance(f64),
    #[error("optimizer did not converge: {0}")]
    NoConvergence(String),
    #[error("invalid neighbor count k = {k} for {n} points")]
    InvalidK { k: usize, n: usize },
    #[error("rho = {rho} outside admissible interval ({lower}, {upper})")]
    InvalidRho { rho: f64, lower: f64, upper: f64 },
    #[error("GLS normal equation is singular")]
    SingularDesign,
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("relative bias undefined for a zero true value")]
    RbUndefined,
    #[error("all {reps} replications failed in cell {cell}")]
    CellFailed { cell: String, reps: usize },
    #[error("{0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Stable identifier for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyInput => "EmptyInput",
            Error::InsufficientPoints { .. } => "InsufficientPoints",
            Error::IndexError { .. } => "IndexError",
            Error::InvalidPoints(_) => "InvalidPoints",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::InvalidRadius(_) => "InvalidRadius",
            Error::MissingData(_) => "MissingData",
            Error::EmptySample => "EmptySample",
            Error::InsufficientCouples { .. } => "InsufficientCouples",
            Error::InvalidParams(_) => "InvalidParams",
            Error::SingularSystem { .. } => "SingularSystem",
            Error::DegenerateVariance(_) => "DegenerateVariance",
            Error::NoConvergence(_) => "NoConvergence",
            Error::InvalidK { .. } => "InvalidK",
            Error::InvalidRho { .. } => "InvalidRho",
            Error::SingularDesign => "SingularDesign",
            Error::NotPositiveDefinite => "NotPositiveDefinite",
            Error::RbUndefined => "RBUndefined",
            Error::CellFailed { .. } => "CellFailed",
            Error::Io(_) => "Io",
            Error::Parse(_) => "Parse",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
