use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("mode {0} listed more than once")]
    DuplicateMode(usize),

    #[error("tensor order {0} is not supported (need at least 2)")]
    OrderTooSmall(usize),

    #[error("factor {mode} is not unit length (norm {norm})")]
    NonUnitFactor { mode: usize, norm: f64 },

    #[error("degenerate factor set: mode {0} has a zero-norm block")]
    Degenerate(usize),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigensolver did not converge after {0} sweeps")]
    NoConvergence(usize),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("solver failed: {0}")]
    SolverFailed(String),

    #[error("arcsin argument {0} outside [-1, 1]")]
    Domain(f64),

    #[error("bad tensor file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
