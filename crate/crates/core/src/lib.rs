//! Structured solvers for finite-horizon LQ optimal control of `K x N` grids
//! of coupled linear subsystems.
//!
//! The optimality conditions are reduced to a Schur-complement system
//! `Δ δ = ω` over the dynamics multipliers. `Δ` is applied matrix-free from
//! its stage blocks and solved by preconditioned conjugate gradients, with a
//! nested block Jacobi sweep as the preconditioner. A dense oracle is kept
//! alongside for verification at small sizes.
//!
//! ```
//! use gridlq::{generate_case1_msd, solve_problem, SolverChoice};
//!
//! let p = generate_case1_msd(3, 3, 3, 0);
//! let out = solve_problem(&p, &SolverChoice::default()).unwrap();
//! assert!(out.report.converged);
//! ```

pub mod block_linalg;
pub mod diagnostics;
mod error;
pub mod grid_problem;
pub mod kkt_assembly;
pub mod nbjm;
pub mod pcgm;
mod solve;
mod vector;

pub use error::{Error, PartialSolve, Result};
pub use grid_problem::{generate_case1_msd, generate_case2_irrigation, validate, GridLQProblem};
pub use solve::{solve_problem, solve_problem_with, PhaseTimings, SolveOutput, SolverChoice};
pub use vector::StageBlockVector;

/// Execution strategy of the block maps.
///
/// Both strategies run every block computation in the same order, so results
/// are bitwise identical; `Parallel` only distributes independent blocks
/// over the rayon pool.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Exec {
    #[default]
    Sequential,
    Parallel,
}
