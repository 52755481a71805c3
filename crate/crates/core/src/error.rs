use thiserror::Error;

use crate::block_linalg::LinalgError;
use crate::grid_problem::ValidationReport;
use crate::pcgm::SolveReport;
use crate::vector::StageBlockVector;

/// Best iterate and report of a solve that hit its iteration budget.
#[derive(Clone, Debug)]
pub struct PartialSolve {
    pub iterate: StageBlockVector,
    pub report: SolveReport,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("problem failed validation:\n{0}")]
    Validation(ValidationReport),
    #[error("dimension {dim} exceeds the dense guard {limit}")]
    DimensionGuard { dim: usize, limit: usize },
    #[error("no convergence after {} iterations (last residual {:e})", .0.report.steps, .0.report.final_residual())]
    MaxIterationsExceeded(Box<PartialSolve>),
    #[error("conjugate gradient breakdown at step {step}: curvature {curvature:e} is not positive")]
    Breakdown { step: usize, curvature: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("power iteration stalled after {iterations} iterations")]
    PowerIterationStall { iterations: usize },
    #[error("eigen decomposition failed: {0}")]
    Eigen(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
