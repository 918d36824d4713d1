//! Sparse linear algebra and the bound-constrained damage solver.

pub mod cholesky;
pub mod obstacle;
pub mod pcg;
pub mod sparse;

use thiserror::Error;

pub use cholesky::{solve_spd, BandedCholesky, SPD_RESIDUAL_TOL};
pub use obstacle::{solve_obstacle, ObstacleOperator, ObstacleProblem, ObstacleSolution, QuadraticOperator};
pub use pcg::{pcg, PcgOutcome};
pub use sparse::CsrMatrix;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SolverError {
    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("relative residual {residual:e} exceeds {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("non-finite data: {0}")]
    NonFinite(String),

    #[error("infeasible constraints: {0}")]
    Infeasible(String),
}
