//! Dense kernels and block-banded containers shared by every solver stage.

mod banded;
mod dense;

pub use banded::{
    banded_matvec, block_banded_factor, block_banded_solve, block_tridiag_factor, block_tridiag_solve, Block, BlockBandedMat, BlockCholeskyFactor, BlockRef,
};
pub use dense::{
    backward_substitute_transposed, cholesky_solve_in_place, dense_cholesky, dot, forward_substitute,
    right_solve_lower_transposed, DenseMat, PIVOT_TOLERANCE,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not flagged symmetric")]
    NotSymmetric,
    #[error("block ({row}, {col}) lies outside the stored band (bandwidth {bandwidth})")]
    OutsideBand { row: usize, col: usize, bandwidth: usize },
    #[error("block ({row}, {col}) has shape {found:?}, expected {expected:?}")]
    BlockShape { row: usize, col: usize, expected: (usize, usize), found: (usize, usize) },
}
