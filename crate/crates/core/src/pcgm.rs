//! Preconditioned conjugate gradients on the matrix-free `Δ`.
//!
//! Line numbers used as keys of [`SolveReport::line_flops`]:
//!
//! ```text
//!  2  r = rhs - Δ δ
//!  3  d = P r
//!  4  μ = dᵀ r
//!  7  y = Δ d
//!  8  ϑ = μ / (yᵀ d)
//!  9  δ = δ + ϑ d
//! 10  r = r - ϑ y
//! 11  exit if ‖r‖∞ < ε
//! 12  q = P r
//! 13  μ⁺ = qᵀ r
//! 14  d = q + (μ⁺ / μ) d
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::block_linalg::{dot, LinalgError};
use crate::kkt_assembly::SchurOperator;
use crate::nbjm::{NbjmConfig, NbjmPreconditioner};
use crate::vector::{norm_inf, StageBlockVector};
use crate::{Error, PartialSolve};

/// Preconditioner choice of a PCG run.
#[derive(Clone, Copy, Debug)]
pub enum Preconditioner<'a> {
    Identity,
    Nbjm(&'a NbjmPreconditioner),
}

/// Preconditioner requested by configuration, before it is built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PreconditionerKind {
    Identity,
    Nbjm(NbjmConfig),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PcgmConfig {
    pub tol_inf: f64,
    pub max_steps: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for PcgmConfig {
    fn default() -> Self {
        Self { tol_inf: 1e-9, max_steps: 10_000, preconditioner: PreconditionerKind::Nbjm(NbjmConfig::default()) }
    }
}

impl PcgmConfig {
    pub fn check(&self) -> Result<(), Error> {
        if !(self.tol_inf > 0.0) {
            return Err(Error::Config("tol_inf must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::Config("max_steps must be at least 1".into()));
        }
        if let PreconditionerKind::Nbjm(c) = &self.preconditioner {
            c.check()?;
        }
        Ok(())
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    /// Completed iterations.
    pub steps: usize,
    /// PCG: `‖r^{(i)}‖∞` for `i = 0..=steps`. NBJM: `‖δ^{s+1} - δ^s‖∞` per outer sweep.
    pub residual_inf_history: Vec<f64>,
    pub converged: bool,
    pub tol_inf: f64,
    pub wall_time_s: f64,
    /// Flops per listing line, accumulated over the solve.
    pub line_flops: BTreeMap<u32, u64>,
    /// Flops of each iteration.
    pub step_flops: Vec<u64>,
}

impl SolveReport {
    pub fn new(tol_inf: f64) -> Self {
        Self { tol_inf, ..Self::default() }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_inf_history.last().copied().unwrap_or(f64::NAN)
    }

    /// Sum over the listing lines; for reports without line counters, the
    /// sum over iterations.
    pub fn total_flops(&self) -> u64 {
        if self.line_flops.is_empty() {
            self.step_flops.iter().sum()
        } else {
            self.line_flops.values().sum()
        }
    }

    fn count(&mut self, line: u32, flops: u64) {
        *self.line_flops.entry(line).or_insert(0) += flops;
    }
}

fn apply_preconditioner(p: &Preconditioner<'_>, r: &[f64], out: &mut [f64]) -> u64 {
    match p {
        Preconditioner::Identity => {
            out.copy_from_slice(r);
            0
        }
        Preconditioner::Nbjm(nb) => nb.apply_into(r, out),
    }
}

/// Per-iteration view handed to an observer: step index, iterate, recurred residual.
pub type Observer<'o> = &'o mut dyn FnMut(usize, &[f64], &[f64]);

/// PCG from `δ⁰ = 0`.
pub fn pcg_solve(
    sop: &SchurOperator,
    p: Preconditioner<'_>,
    rhs: &StageBlockVector,
    cfg: &PcgmConfig,
) -> Result<(StageBlockVector, SolveReport), Error> {
    pcg_solve_observed(sop, p, rhs, None, cfg, &mut |_, _, _| {})
}

/// Unpreconditioned CG baseline.
pub fn cg_solve(
    sop: &SchurOperator,
    rhs: &StageBlockVector,
    cfg: &PcgmConfig,
) -> Result<(StageBlockVector, SolveReport), Error> {
    pcg_solve(sop, Preconditioner::Identity, rhs, cfg)
}

/// PCG with optional warm start; `observer` sees every iterate, starting
/// with the initial one.
pub fn pcg_solve_observed(
    sop: &SchurOperator,
    p: Preconditioner<'_>,
    rhs: &StageBlockVector,
    warm_start: Option<&StageBlockVector>,
    cfg: &PcgmConfig,
    observer: Observer<'_>,
) -> Result<(StageBlockVector, SolveReport), Error> {
    if !(cfg.tol_inf > 0.0) || cfg.max_steps == 0 {
        return Err(Error::Config("tol_inf must be positive and max_steps at least 1".into()));
    }
    let n = sop.dim();
    if rhs.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, found: rhs.len() }.into());
    }
    if let Preconditioner::Nbjm(nb) = &p {
        if nb.dim() != n {
            return Err(LinalgError::DimensionMismatch { expected: n, found: nb.dim() }.into());
        }
    }
    let started = Instant::now();
    let nf = n as u64;
    let mut report = SolveReport::new(cfg.tol_inf);
    let b = rhs.as_slice();

    let mut delta = vec![0.0; n];
    let mut r = b.to_vec();
    if let Some(x0) = warm_start {
        delta.copy_from_slice(x0.as_slice());
        let mut ax = vec![0.0; n];
        let f = sop.apply_delta_into(&delta, &mut ax)?;
        r.iter_mut().zip(&ax).for_each(|(ri, a)| *ri -= a);
        report.count(2, f + nf);
    }
    let mut rnorm = norm_inf(&r);
    report.residual_inf_history.push(rnorm);
    observer(0, &delta, &r);

    let finish = |mut report: SolveReport, delta: Vec<f64>| -> Result<(StageBlockVector, SolveReport), Error> {
        report.wall_time_s = started.elapsed().as_secs_f64();
        let iterate = StageBlockVector::from_vec(rhs.layout().clone(), delta)?;
        if report.converged {
            Ok((iterate, report))
        } else {
            Err(Error::MaxIterationsExceeded(Box::new(PartialSolve { iterate, report })))
        }
    };

    if rnorm < cfg.tol_inf {
        report.converged = true;
        return finish(report, delta);
    }

    let mut d = vec![0.0; n];
    let f = apply_preconditioner(&p, &r, &mut d);
    report.count(3, f);
    let mut mu = dot(&d, &r);
    report.count(4, 2 * nf);

    let mut y = vec![0.0; n];
    let mut q = vec![0.0; n];
    for i in 0..cfg.max_steps {
        let mut step = 0u64;
        let mut tally = |report: &mut SolveReport, line: u32, f: u64| {
            report.count(line, f);
            step += f;
        };

        let f = sop.apply_delta_into(&d, &mut y)?;
        tally(&mut report, 7, f);
        let yd = dot(&y, &d);
        tally(&mut report, 8, 2 * nf + 1);
        if !(yd > 0.0) {
            return Err(Error::Breakdown { step: i, curvature: yd });
        }
        let theta = mu / yd;
        delta.iter_mut().zip(&d).for_each(|(x, di)| *x += theta * di);
        tally(&mut report, 9, 2 * nf);
        r.iter_mut().zip(&y).for_each(|(ri, yi)| *ri -= theta * yi);
        tally(&mut report, 10, 2 * nf);
        rnorm = norm_inf(&r);
        tally(&mut report, 11, nf);
        report.residual_inf_history.push(rnorm);
        report.steps = i + 1;
        observer(i + 1, &delta, &r);
        if rnorm < cfg.tol_inf {
            report.step_flops.push(step);
            report.converged = true;
            return finish(report, delta);
        }

        let f = apply_preconditioner(&p, &r, &mut q);
        tally(&mut report, 12, f);
        let mu_next = dot(&q, &r);
        tally(&mut report, 13, 2 * nf);
        let beta = mu_next / mu;
        d.iter_mut().zip(&q).for_each(|(di, qi)| *di = qi + beta * *di);
        tally(&mut report, 14, 2 * nf + 1);
        mu = mu_next;
        report.step_flops.push(step);
    }
    finish(report, delta)
}
