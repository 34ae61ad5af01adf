use thiserror::Error;

use crate::tensor::TensorError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("mesh resolution {0} is below the minimum of 2")]
    MeshTooCoarse(usize),
    #[error("{what}: expected length {expected}, got {got}")]
    ShapeMismatch { what: &'static str, expected: usize, got: usize },
    #[error("negative reaction {value:e} on element {element}")]
    NegativeReaction { element: usize, value: f64 },
    #[error("conjugate gradients stopped after {iterations} iterations at relative residual {residual:e}")]
    CgFailed { iterations: usize, residual: f64 },
    #[error("Newton iteration failed after {iterations} steps; residual history {history:?}")]
    NewtonFailed { iterations: usize, history: Vec<f64> },
    #[error("label {label} is not in the control set of size {size}")]
    UnknownLabel { label: usize, size: usize },
    #[error("period {eps} is not resolved by a mesh with m = {m} (need eps >= 8/m)")]
    UnderResolved { eps: f64, m: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::ShapeMismatch { what, expected, got })
    }
}
