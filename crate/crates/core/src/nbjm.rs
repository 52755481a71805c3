//! Nested block Jacobi iteration on `Δ δ̃ = r`.
//!
//! The outer level splits `Δ = Ψ̃ - Ξ̃` (stage diagonal vs. temporal
//! coupling); each outer step approximately solves `Ψ̃ θ = r + Ξ̃ δ` with `L`
//! inner sweeps of the pair splitting `Ψ̃ = Φ̃ - Ω̃`, whose diagonal systems
//! `Φ̄_{v,t}` are factored once up front. With a fixed budget `(S, L)` and
//! `L` even the map `r ↦ δ^S` is symmetric positive definite and serves as a
//! preconditioner.

use std::sync::Arc;

use rayon::prelude::*;

use crate::block_linalg::{BlockCholeskyFactor, DenseMat};
use crate::kkt_assembly::{build_splitting, check_guard, SchurOperator, SplitOperator};
use crate::pcgm::SolveReport;
use crate::vector::{norm_inf, pair_segments_mut, StageBlockVector};
use crate::{Error, Exec, PartialSolve};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NbjmMode {
    /// Iterate until successive iterates agree to `standalone_tol`.
    Standalone,
    /// Fixed `S` outer steps, no early exit.
    Preconditioner,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NbjmConfig {
    pub inner_l: usize,
    pub outer_s: usize,
    pub mode: NbjmMode,
    pub standalone_tol: f64,
    pub standalone_max_outer: usize,
}

impl Default for NbjmConfig {
    fn default() -> Self {
        Self { inner_l: 2, outer_s: 2, mode: NbjmMode::Preconditioner, standalone_tol: 1e-9, standalone_max_outer: 100_000 }
    }
}

impl NbjmConfig {
    pub fn preconditioner(inner_l: usize, outer_s: usize) -> Self {
        Self { inner_l, outer_s, ..Self::default() }
    }

    pub fn standalone(inner_l: usize, tol: f64, max_outer: usize) -> Self {
        Self {
            inner_l,
            outer_s: 1,
            mode: NbjmMode::Standalone,
            standalone_tol: tol,
            standalone_max_outer: max_outer,
        }
    }

    pub fn check(&self) -> Result<(), Error> {
        if self.inner_l == 0 {
            return Err(Error::Config("inner sweep count L must be at least 1".into()));
        }
        if self.outer_s == 0 {
            return Err(Error::Config("outer step count S must be at least 1".into()));
        }
        if self.mode == NbjmMode::Preconditioner && self.inner_l % 2 != 0 {
            return Err(Error::Config(format!("preconditioner mode needs an even L, got {}", self.inner_l)));
        }
        if self.mode == NbjmMode::Standalone && !(self.standalone_tol > 0.0) {
            return Err(Error::Config("standalone tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Splitting, cached `Φ̄_{v,t}` factors and iteration budget.
#[derive(Clone, Debug)]
pub struct NbjmPreconditioner {
    schur: Arc<SchurOperator>,
    split: SplitOperator,
    /// `factors[t][v]`.
    factors: Vec<Vec<BlockCholeskyFactor>>,
    config: NbjmConfig,
    factor_flops: u64,
}

impl NbjmPreconditioner {
    /// Builds the splitting and factors every `Φ̄_{v,t}` once.
    pub fn new(schur: Arc<SchurOperator>, config: NbjmConfig) -> Result<Self, Error> {
        config.check()?;
        let split = build_splitting(&schur);
        let l = schur.layout().clone();
        let mut factors = Vec::with_capacity(l.num_stages());
        let mut factor_flops = 0;
        for t in 0..l.num_stages() {
            let mut stage = Vec::with_capacity(l.num_pairs());
            for v in 0..l.num_pairs() {
                let f = BlockCholeskyFactor::new(split.phi(v, t))?;
                factor_flops += f.factor_flops();
                stage.push(f);
            }
            factors.push(stage);
        }
        Ok(Self { schur, split, factors, config, factor_flops })
    }

    pub fn schur(&self) -> &Arc<SchurOperator> {
        &self.schur
    }

    pub fn split(&self) -> &SplitOperator {
        &self.split
    }

    pub fn factors(&self) -> &[Vec<BlockCholeskyFactor>] {
        &self.factors
    }

    pub fn config(&self) -> &NbjmConfig {
        &self.config
    }

    pub fn factor_flops(&self) -> u64 {
        self.factor_flops
    }

    pub fn dim(&self) -> usize {
        self.schur.dim()
    }
}

/// `L` inner sweeps `Φ̃ θ^{l+1} = rhs + Ω̃ θ^l` from `θ^0 = 0`.
///
/// Each sweep is an independent solve per `(t, v)`; `out` receives `θ^L`.
pub fn inner_sweep(
    split: &SplitOperator,
    factors: &[Vec<BlockCholeskyFactor>],
    rhs: &[f64],
    inner_l: usize,
    exec: Exec,
    out: &mut [f64],
) -> u64 {
    inner_sweep_from(split, factors, rhs, None, inner_l, exec, out)
}

/// As [`inner_sweep`], starting from `theta0` when given.
fn inner_sweep_from(
    split: &SplitOperator,
    factors: &[Vec<BlockCholeskyFactor>],
    rhs: &[f64],
    theta0: Option<&[f64]>,
    inner_l: usize,
    exec: Exec,
    out: &mut [f64],
) -> u64 {
    let layout = split.layout().clone();
    let nv = layout.num_pairs();
    let mut prev = theta0.map_or_else(|| vec![0.0; rhs.len()], <[f64]>::to_vec);
    let zero_start = theta0.is_none();
    let mut flops = 0;
    out.fill(0.0);
    for l in 0..inner_l {
        let base_of = |t: usize, v: usize| t * layout.n_hat() + layout.pair(v).stage_range.start;
        let solve = |k: usize, seg: &mut [f64]| -> u64 {
            let (t, v) = (k / nv, k % nv);
            let pair = layout.pair(v);
            let base = base_of(t, v);
            let mut tau = rhs[base..base + pair.len()].to_vec();
            let mut f = 0;
            if l > 0 || !zero_start {
                if let Some(w) = split.omega(v, t) {
                    let b = base_of(t, v - 1);
                    f += w.gemv_add(&layout, v, &prev[b..b + layout.pair(v - 1).len()], &mut tau);
                }
                if v + 1 < nv {
                    let w = split.omega(v + 1, t).expect("coupling to the next pair");
                    let b = base_of(t, v + 1);
                    f += w.gemv_t_add(&layout, v + 1, &prev[b..b + layout.pair(v + 1).len()], &mut tau);
                }
            }
            let mut inter = vec![0.0; pair.len()];
            pair.gather(&tau, &mut inter);
            f += factors[t][v].solve_in_place(&mut inter).expect("factor dimension matches its pair");
            pair.scatter(&inter, seg);
            f
        };
        let segs = pair_segments_mut(&layout, out);
        flops += match exec {
            Exec::Sequential => segs.into_iter().enumerate().map(|(k, s)| solve(k, s)).sum::<u64>(),
            Exec::Parallel => segs.into_par_iter().enumerate().map(|(k, s)| solve(k, s)).sum::<u64>(),
        };
        if l + 1 < inner_l {
            prev.copy_from_slice(out);
        }
    }
    flops
}

impl NbjmPreconditioner {
    /// One outer step: `L` inner sweeps on `Ψ̃ θ = r + Ξ̃ δ`. The sweeps start
    /// from zero, giving `δ⁺ = Υ_L (r + Ξ̃ δ)`, or from `δ` itself when
    /// `warm` is set.
    fn outer_step(&self, r: &[f64], delta: &[f64], first: bool, warm: bool, out: &mut [f64]) -> u64 {
        let mut flops = 0;
        let mut rhs = r.to_vec();
        if !first {
            flops += self.schur.apply_xi_split_add(delta, &mut rhs).expect("conforming dimensions");
        }
        let theta0 = (warm && !first).then_some(delta);
        flops += inner_sweep_from(&self.split, &self.factors, &rhs, theta0, self.config.inner_l, self.schur.exec(), out);
        flops
    }

    /// `∇_S r`: `S` outer steps from zero with no early exit.
    pub fn apply_into(&self, r: &[f64], out: &mut [f64]) -> u64 {
        let mut delta = vec![0.0; r.len()];
        let mut flops = 0;
        for s in 0..self.config.outer_s {
            flops += self.outer_step(r, &delta, s == 0, false, out);
            if s + 1 < self.config.outer_s {
                delta.copy_from_slice(out);
            }
        }
        flops
    }
}

/// Applies the fixed-budget preconditioner map `r ↦ δ^S`.
pub fn precondition_apply(p: &NbjmPreconditioner, r: &StageBlockVector) -> Result<StageBlockVector, Error> {
    if r.len() != p.dim() {
        return Err(crate::block_linalg::LinalgError::DimensionMismatch { expected: p.dim(), found: r.len() }.into());
    }
    let mut out = StageBlockVector::zeros(r.layout().clone());
    p.apply_into(r.as_slice(), out.as_mut_slice());
    Ok(out)
}

/// Dense `∇_S`, one unit vector at a time.
pub fn materialize_preconditioner_inverse(p: &NbjmPreconditioner, guard: usize) -> Result<DenseMat, Error> {
    let n = p.dim();
    check_guard(n, guard)?;
    let mut m = DenseMat::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for k in 0..n {
        e[k] = 1.0;
        p.apply_into(&e, &mut col);
        e[k] = 0.0;
        for (i, &v) in col.iter().enumerate() {
            m[(i, k)] = v;
        }
    }
    Ok(m)
}

/// Standalone NBJM: outer steps until `‖δ^{s+1} - δ^s‖∞ < tol`.
///
/// Unlike the preconditioner map, each outer step starts its inner sweeps
/// from the current outer iterate. Its fixed point then satisfies
/// `(I - (Φ̃⁻¹Ω̃)^L) δ = Υ_L (r + Ξ̃ δ)`, which is `Δ δ = r`; restarting the
/// sweeps from zero would instead converge to `(Υ_L⁻¹ - Ξ̃) δ = r`.
///
/// Returns the iterate and the number of outer steps after which it stopped
/// changing, i.e. the index `s` of the step whose update fell below `tol`.
/// At most `max_outer + 1` sweeps are run. The report's history holds the
/// successive-iterate differences.
pub fn nbjm_solve(
    p: &NbjmPreconditioner,
    r: &StageBlockVector,
    tol: f64,
    max_outer: usize,
) -> Result<(StageBlockVector, SolveReport), Error> {
    if r.len() != p.dim() {
        return Err(crate::block_linalg::LinalgError::DimensionMismatch { expected: p.dim(), found: r.len() }.into());
    }
    if !(tol > 0.0) {
        return Err(Error::Config("tolerance must be positive".into()));
    }
    let started = std::time::Instant::now();
    let n = p.dim();
    let mut delta = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut report = SolveReport::new(tol);
    for s in 0..=max_outer {
        let flops = p.outer_step(r.as_slice(), &delta, s == 0, true, &mut next);
        let diff = norm_inf(&delta.iter().zip(&next).map(|(a, b)| b - a).collect::<Vec<_>>());
        std::mem::swap(&mut delta, &mut next);
        report.step_flops.push(flops);
        report.residual_inf_history.push(diff);
        if diff < tol {
            report.steps = s;
            report.converged = true;
            break;
        }
        report.steps = s + 1;
    }
    report.wall_time_s = started.elapsed().as_secs_f64();
    let iterate = StageBlockVector::from_vec(r.layout().clone(), delta)?;
    if report.converged {
        Ok((iterate, report))
    } else {
        report.steps = max_outer;
        Err(Error::MaxIterationsExceeded(Box::new(PartialSolve { iterate, report })))
    }
}
