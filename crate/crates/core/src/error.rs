use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: expected a function on a {expected}-node grid, found {found} nodes")]
    GridMismatch { expected: usize, found: usize },

    #[error("index n = {n} is out of range (maximum {max})")]
    OutOfRange { n: u32, max: u32 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The QP solver hit its iteration cap. Carries the best feasible iterate
    /// (grid values on the x-grid) and its KKT residual.
    #[error("solver did not converge after {iterations} iterations (kkt residual {kkt_residual:e})")]
    NonConvergence {
        iterations: usize,
        kkt_residual: f64,
        best: Vec<f64>,
    },

    #[error("degenerate sample: {flagged} of {total} z-nodes have estimated density below the floor")]
    DegenerateSample { flagged: usize, total: usize },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
