use alloc::string::String;

use crate::losses::LossFamily;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no flat interval for loss {0:?}")]
    NoFlatInterval(LossFamily),
    #[error("loss {0:?} is not a safe loss")]
    UnsafeLoss(LossFamily),
    #[error("nonsmooth loss unsupported by solver")]
    NonsmoothLoss,
    #[error("solver diverged: non-finite objective at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("baseline requires strong convexity (L2sq penalty)")]
    NotStronglyConvex,
    #[error("L1 penalty is not supported in kernelized mode")]
    L1InKernelMode,
    #[error("zero subgradient supplied to ellipsoid step")]
    ZeroSubgradient,
    #[error("ellipsoid matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("conjugate gradient did not converge after {iterations} iterations")]
    CgNotConverged { iterations: usize },
}
