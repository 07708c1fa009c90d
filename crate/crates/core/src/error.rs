use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("argument outside the function's domain: {0}")]
    Domain(String),

    #[error("invalid input data: {0}")]
    Input(String),

    #[error("grid mismatch: {0}")]
    Dimension(String),

    #[error("singular linear system at pivot {0}")]
    Singular(usize),

    #[error("root finder failed at x = {x}")]
    RootFinder { x: f64 },

    #[error("newton iteration did not converge (last residual {residual:.3e})")]
    NoConvergence { residual: f64 },

    #[error("iterate left the positive branch (min h = {min_h:.3e})")]
    BranchLost { min_h: f64 },

    #[error("iterate diverged (non-finite values)")]
    Diverged,

    #[error(transparent)]
    Step(#[from] StepFailure),

    #[error("i/o: {0}")]
    Io(String),
}

/// A time step could not be completed even at the smallest allowed `dt`.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("time step failed at t = {t}: dt {dt:.3e} fell below dt_min (last residual {residual:.3e})")]
pub struct StepFailure {
    pub t: f64,
    pub dt: f64,
    pub residual: f64,
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
