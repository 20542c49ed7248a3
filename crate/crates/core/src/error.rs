use std::path::PathBuf;

/// Errors raised by the laboratory.
///
/// Runtime failures inside a time loop (dry states, solver stalls, blow-up)
/// are reported as termination reasons by [`crate::timeloop::run`]; the
/// variants here surface when an operation is called directly.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch between operands")]
    GridMismatch,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite values detected in {0}")]
    Corrupted(&'static str),

    #[error("still-water depth is not positive (min h_b = {h_min})")]
    NonpositiveDepth { h_min: f64 },

    #[error("water column vanishes (min h = {min_h})")]
    DryState { min_h: f64 },

    #[error("log argument 1 + eps*zeta/h_b is not positive (min = {min_arg})")]
    LogDomain { min_arg: f64 },

    #[error("elliptic solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("time step {dt} exceeds the stability limit {limit} for this model")]
    Cfl { dt: f64, limit: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("no shock forms: the initial slope is nowhere negative")]
    NoShock,

    #[error("dense operator of size {size} exceeds the limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("Gram matrix is not symmetric positive definite")]
    NotSpd,

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
