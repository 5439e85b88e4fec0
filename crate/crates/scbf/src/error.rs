use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("fields live on different grids: {0}")]
    GridMismatch(String),
    #[error("{solver} did not converge in {iterations} iterations (residual {residual:.3e}, target {target:.3e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("non-finite state at step {step} (t = {time})")]
    NumericalAbort { step: usize, time: f64 },
    #[error("time step {dt} violates the advection guard (limit {limit})")]
    Cfl { dt: f64, limit: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("snapshot decode: {0}")]
    Snapshot(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
