use thiserror::Error;

/// Errors raised by the solvers and their I/O helpers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid geometry, resolution, parameter or option.
    #[error("configuration error: {0}")]
    Config(String),

    /// A field does not have the node count its grid expects.
    #[error("field has {found} values but the grid has {expected} nodes")]
    Mismatch { expected: usize, found: usize },

    /// Non-finite values or overflow in a nonlinear evaluation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// An iterative method ran out of budget; `trace` keeps the per-iteration history.
    #[error("no convergence in {method} after {iterations} iterations (last residual {residual:.3e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    /// A loop passes too close to the point it is supposed to wind around.
    #[error("degenerate loop: point {index} lies within {distance:.3e} of the center")]
    DegenerateLoop { index: usize, distance: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
