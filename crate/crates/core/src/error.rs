use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("snapshot {path}: {msg}")]
    Snapshot { path: String, msg: String },

    #[error("solver diverged at iteration {iteration}: {msg}")]
    Diverged { iteration: usize, msg: String },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("empty sample set: {0}")]
    Empty(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
