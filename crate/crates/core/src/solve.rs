use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{dense_reference_solve, kkt_residual, recover_solution, KktResiduals, TrajectorySolution};
use crate::grid_problem::GridLQProblem;
use crate::kkt_assembly::{build_schur, build_stacked, SchurOperator, StackedSystem, DEFAULT_DENSE_GUARD};
use crate::nbjm::{nbjm_solve, NbjmConfig, NbjmPreconditioner};
use crate::pcgm::{pcg_solve, PcgmConfig, Preconditioner, PreconditionerKind, SolveReport};
use crate::vector::norm_inf;
use crate::{Error, Exec};

/// End-to-end solver selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SolverChoice {
    /// PCG with the `(L, S)` nested block Jacobi preconditioner.
    Pcgm { inner_l: usize, outer_s: usize, tol: f64, max_steps: usize },
    /// Unpreconditioned CG.
    Cg { tol: f64, max_steps: usize },
    /// Standalone nested block Jacobi.
    Nbjm { inner_l: usize, tol: f64, max_outer: usize },
    /// Dense Cholesky oracle.
    Dense { guard: usize },
}

impl Default for SolverChoice {
    fn default() -> Self {
        SolverChoice::Pcgm { inner_l: 2, outer_s: 2, tol: 1e-9, max_steps: 10_000 }
    }
}

/// Wall-clock seconds per phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct PhaseTimings {
    pub assembly_s: f64,
    pub factorization_s: f64,
    pub solve_s: f64,
}

#[derive(Debug)]
pub struct SolveOutput {
    pub solution: TrajectorySolution,
    pub report: SolveReport,
    pub kkt: KktResiduals,
    /// `‖Δ δ̃ - ω̃‖∞` of the returned multipliers.
    pub final_residual: f64,
    pub timings: PhaseTimings,
    pub factor_flops: u64,
    pub stacked: StackedSystem,
    pub schur: Arc<SchurOperator>,
    pub preconditioner: Option<NbjmPreconditioner>,
}

/// Validates, assembles, solves and recovers `p` sequentially.
pub fn solve_problem(p: &GridLQProblem, choice: &SolverChoice) -> Result<SolveOutput, Error> {
    solve_problem_with(p, choice, Exec::Sequential)
}

pub fn solve_problem_with(p: &GridLQProblem, choice: &SolverChoice, exec: Exec) -> Result<SolveOutput, Error> {
    let t0 = Instant::now();
    let stacked = build_stacked(p)?;
    let schur = Arc::new(build_schur(&stacked).with_exec(exec));
    let mut timings = PhaseTimings { assembly_s: t0.elapsed().as_secs_f64(), ..Default::default() };

    let nbjm_config = match *choice {
        SolverChoice::Pcgm { inner_l, outer_s, .. } => Some(NbjmConfig::preconditioner(inner_l, outer_s)),
        SolverChoice::Nbjm { inner_l, tol, max_outer } => Some(NbjmConfig::standalone(inner_l, tol, max_outer)),
        _ => None,
    };
    let t1 = Instant::now();
    let preconditioner = nbjm_config.map(|c| NbjmPreconditioner::new(schur.clone(), c)).transpose()?;
    let factor_flops = preconditioner.as_ref().map_or(0, |p| p.factor_flops());
    timings.factorization_s = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let rhs = stacked.omega();
    let (delta, report) = match *choice {
        SolverChoice::Pcgm { inner_l, outer_s, tol, max_steps } => {
            let cfg = PcgmConfig {
                tol_inf: tol,
                max_steps,
                preconditioner: PreconditionerKind::Nbjm(NbjmConfig::preconditioner(inner_l, outer_s)),
            };
            cfg.check()?;
            pcg_solve(&schur, Preconditioner::Nbjm(preconditioner.as_ref().unwrap()), rhs, &cfg)?
        }
        SolverChoice::Cg { tol, max_steps } => {
            let cfg = PcgmConfig { tol_inf: tol, max_steps, preconditioner: PreconditionerKind::Identity };
            cfg.check()?;
            pcg_solve(&schur, Preconditioner::Identity, rhs, &cfg)?
        }
        SolverChoice::Nbjm { tol, max_outer, .. } => nbjm_solve(preconditioner.as_ref().unwrap(), rhs, tol, max_outer)?,
        SolverChoice::Dense { guard } => {
            let sol = dense_reference_solve(p, guard.max(1))?;
            let mut report = SolveReport::new(0.0);
            report.converged = true;
            (sol.delta, report)
        }
    };
    timings.solve_s = t2.elapsed().as_secs_f64();

    let mut r = vec![0.0; schur.dim()];
    schur.apply_delta_into(delta.as_slice(), &mut r)?;
    r.iter_mut().zip(rhs.as_slice()).for_each(|(a, b)| *a -= b);
    let final_residual = norm_inf(&r);
    let solution = recover_solution(&stacked, &delta);
    let kkt = kkt_residual(&stacked, &solution);
    Ok(SolveOutput { solution, report, kkt, final_residual, timings, factor_flops, stacked, schur, preconditioner })
}

impl SolverChoice {
    pub fn dense() -> Self {
        SolverChoice::Dense { guard: DEFAULT_DENSE_GUARD }
    }
}
