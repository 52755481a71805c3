use std::sync::Arc;

use rayon::prelude::*;

use super::grid_op::{add_node_block, new_grid_op, stored_node_blocks, GridBlockMat};
use super::StackedSystem;
use crate::block_linalg::{Block, DenseMat, LinalgError};
use crate::grid_problem::GridLayout;
use crate::vector::{column_segments_mut, StageBlockVector};
use crate::{Error, Exec};

/// Dense matrices larger than this are refused unless a caller raises the guard.
pub const DEFAULT_DENSE_GUARD: usize = 2000;

pub(crate) fn check_guard(dim: usize, limit: usize) -> Result<(), Error> {
    if dim > limit {
        return Err(Error::DimensionGuard { dim, limit });
    }
    Ok(())
}

/// Matrix-free Schur complement `Δ = Ã Q̃⁻¹ Ãᵀ + B̃ R̃⁻¹ B̃ᵀ`.
///
/// `Δ` is block tri-diagonal in time: diagonal blocks `Ψ̂_t` (penta-diagonal
/// in space) and sub-diagonal blocks `Ξ̂_t = -Â_t Q̂_t⁻¹`, so
/// `(Δ x)_t = Ψ̂_t x_t + Ξ̂_{t-1} x_{t-1} + Ξ̂_tᵀ x_{t+1}`.
#[derive(Clone, Debug)]
pub struct SchurOperator {
    layout: Arc<GridLayout>,
    psi: Vec<GridBlockMat>,
    xi: Vec<GridBlockMat>,
    exec: Exec,
}

/// Assembles `Ψ̂_t` and `Ξ̂_t` node by node.
pub fn build_schur(s: &StackedSystem) -> SchurOperator {
    let layout = s.layout().clone();
    let l = &*layout;
    let horizon = s.horizon();
    let nodes = l.num_nodes();

    let diag_terms = |t: usize, op: &mut GridBlockMat| {
        for node in 0..nodes {
            add_node_block(op, l, 2, node, node, 1.0, s.q_inv_block(t, node));
        }
    };

    let mut psi = Vec::with_capacity(horizon + 1);
    let mut psi0 = new_grid_op(l, 2, true);
    diag_terms(0, &mut psi0);
    psi.push(psi0);

    let mut xi = Vec::with_capacity(horizon);
    for t in 0..horizon {
        // Column k of Â_t, as (row node, Â(p, k) Q_k⁻¹, Â(p, k)).
        let mut by_col: Vec<Vec<(usize, DenseMat, &DenseMat)>> = vec![Vec::new(); nodes];
        for (p, k, a) in stored_node_blocks(s.a_hat(t), l) {
            by_col[k].push((p, a.matmul(s.q_inv_block(t, k)), a));
        }
        let mut x_op = new_grid_op(l, 1, false);
        for (k, col) in by_col.iter().enumerate() {
            for (p, w, _) in col {
                add_node_block(&mut x_op, l, 1, *p, k, -1.0, w);
            }
        }
        xi.push(x_op);

        let mut op = new_grid_op(l, 2, true);
        diag_terms(t + 1, &mut op);
        for node in 0..nodes {
            let b = s.b_block(t, node);
            let brb = b.matmul(s.r_inv_block(t, node)).matmul_transposed(b);
            add_node_block(&mut op, l, 2, node, node, 1.0, &brb);
        }
        for col in &by_col {
            for (p, w, _) in col {
                for (q, _, aq) in col {
                    if p >= q {
                        add_node_block(&mut op, l, 2, *p, *q, 1.0, &w.matmul_transposed(aq));
                    }
                }
            }
        }
        symmetrize_node_diagonals(&mut op, l);
        psi.push(op);
    }
    SchurOperator { layout, psi, xi, exec: Exec::Sequential }
}

/// Makes every diagonal node block exactly symmetric, so densified `Δ`
/// equals its transpose bit for bit.
fn symmetrize_node_diagonals(op: &mut GridBlockMat, l: &GridLayout) {
    for j in 0..l.cols() {
        let Some(inner) = op.stored_mut(j, j) else { continue };
        for i in 0..l.rows() {
            if let Some(m) = inner.stored_mut(i, i) {
                let n = m.rows();
                for r in 0..n {
                    for c in 0..r {
                        let v = 0.5 * (m[(r, c)] + m[(c, r)]);
                        m[(r, c)] = v;
                        m[(c, r)] = v;
                    }
                }
            }
        }
    }
}

impl SchurOperator {
    pub fn layout(&self) -> &Arc<GridLayout> {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.n_tilde()
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    pub fn set_exec(&mut self, exec: Exec) {
        self.exec = exec;
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    /// `Ψ̂_t`, `t ∈ 0..=T`.
    pub fn psi(&self, t: usize) -> &GridBlockMat {
        &self.psi[t]
    }

    /// `Ξ̂_t`, `t ∈ 0..T`.
    pub fn xi(&self, t: usize) -> &GridBlockMat {
        &self.xi[t]
    }

    /// Runs `f(t, j, out)` for every `(t, j)` column segment of `y`.
    pub(crate) fn map_columns(&self, y: &mut [f64], f: impl Fn(usize, usize, &mut [f64]) -> u64 + Sync) -> u64 {
        let n = self.layout.cols();
        let segs = column_segments_mut(&self.layout, y);
        match self.exec {
            Exec::Sequential => segs.into_iter().enumerate().map(|(k, s)| f(k / n, k % n, s)).sum(),
            Exec::Parallel => segs.into_par_iter().enumerate().map(|(k, s)| f(k / n, k % n, s)).sum(),
        }
    }

    fn stage<'a>(&self, x: &'a [f64], t: usize) -> &'a [f64] {
        &x[self.layout.stage_range(t)]
    }

    fn check(&self, len: usize) -> Result<(), LinalgError> {
        if len != self.dim() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim(), found: len });
        }
        Ok(())
    }

    /// Temporal coupling part of row `(t, j)`: `Ξ̂_{t-1} x_{t-1} + Ξ̂_tᵀ x_{t+1}`.
    fn temporal_row(&self, t: usize, j: usize, alpha: f64, x: &[f64], out: &mut [f64]) -> u64 {
        let mut flops = 0;
        if t > 0 {
            flops += self.xi[t - 1].row_gemv_add(j, alpha, self.stage(x, t - 1), out);
        }
        if t < self.layout.horizon() {
            flops += self.xi[t].col_gemv_t_add(j, alpha, self.stage(x, t + 1), out);
        }
        flops
    }

    /// `y = Δ x`, returning the flop count.
    pub fn apply_delta_into(&self, x: &[f64], y: &mut [f64]) -> Result<u64, LinalgError> {
        self.check(x.len())?;
        self.check(y.len())?;
        Ok(self.map_columns(y, |t, j, out| {
            out.fill(0.0);
            self.psi[t].row_gemv_add(j, 1.0, self.stage(x, t), out) + self.temporal_row(t, j, 1.0, x, out)
        }))
    }

    /// `Δ x`.
    pub fn apply_delta(&self, x: &StageBlockVector) -> Result<StageBlockVector, LinalgError> {
        let mut y = StageBlockVector::zeros(self.layout.clone());
        self.apply_delta_into(x.as_slice(), y.as_mut_slice())?;
        Ok(y)
    }

    /// `y = Ψ̃ x` (the block diagonal in time).
    pub fn apply_psi_into(&self, x: &[f64], y: &mut [f64]) -> Result<u64, LinalgError> {
        self.check(x.len())?;
        self.check(y.len())?;
        Ok(self.map_columns(y, |t, j, out| {
            out.fill(0.0);
            self.psi[t].row_gemv_add(j, 1.0, self.stage(x, t), out)
        }))
    }

    /// `y += Ξ̃ x` with `Ξ̃ = Ψ̃ - Δ`.
    pub fn apply_xi_split_add(&self, x: &[f64], y: &mut [f64]) -> Result<u64, LinalgError> {
        self.check(x.len())?;
        self.check(y.len())?;
        Ok(self.map_columns(y, |t, j, out| self.temporal_row(t, j, -1.0, x, out)))
    }

    /// Dense `Δ`, assembled from the stored blocks.
    pub fn densify_delta(&self, guard: usize) -> Result<DenseMat, Error> {
        let mut d = self.densify_psi(guard)?;
        let xi = self.densify_xi_split(guard)?;
        d.axpy(-1.0, &xi);
        Ok(d)
    }

    /// Dense `Ψ̃ = blockdiag(Ψ̂_0, …, Ψ̂_T)`.
    pub fn densify_psi(&self, guard: usize) -> Result<DenseMat, Error> {
        check_guard(self.dim(), guard)?;
        let nh = self.layout.n_hat();
        let mut d = DenseMat::zeros(self.dim(), self.dim());
        for (t, p) in self.psi.iter().enumerate() {
            d.set_submatrix(t * nh, t * nh, &p.to_dense());
        }
        Ok(d)
    }

    /// Dense `Ξ̃ = Ψ̃ - Δ`: `-Ξ̂_t` below the diagonal, its transpose above.
    pub fn densify_xi_split(&self, guard: usize) -> Result<DenseMat, Error> {
        check_guard(self.dim(), guard)?;
        let nh = self.layout.n_hat();
        let mut d = DenseMat::zeros(self.dim(), self.dim());
        for (t, x) in self.xi.iter().enumerate() {
            let blk = x.to_dense().scaled(-1.0);
            d.set_submatrix((t + 1) * nh, t * nh, &blk);
            d.set_submatrix(t * nh, (t + 1) * nh, &blk.transpose());
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_problem::{generate_case1_msd, GridLQProblem};
    use crate::kkt_assembly::build_stacked;

    fn scalar_problem(a: f64, b: f64, q: f64, r: f64) -> GridLQProblem {
        let mut p = generate_case1_msd(1, 1, 1, 0);
        let s = p.subsystem_mut(0, 0);
        s.n = 1;
        s.m = 1;
        s.a = vec![DenseMat::from_rows(&[&[a]])];
        s.b = vec![DenseMat::from_rows(&[&[b]])];
        s.q = vec![DenseMat::from_rows(&[&[q]]); 2];
        s.r = vec![DenseMat::from_rows(&[&[r]])];
        p.boundary.gamma = vec![vec![vec![1.0]]];
        p
    }

    #[test]
    fn scalar_blocks_match_formulas() {
        let (a, b, q, r) = (0.7, 1.3, 2.0, 0.5);
        let sop = build_schur(&build_stacked(&scalar_problem(a, b, q, r)).unwrap());
        let psi0 = sop.psi(0).to_dense();
        let psi1 = sop.psi(1).to_dense();
        let xi0 = sop.xi(0).to_dense();
        assert!((psi0[(0, 0)] - 1.0 / q).abs() < 1e-15);
        assert!((psi1[(0, 0)] - (1.0 / q + a * a / q + b * b / r)).abs() < 1e-14);
        assert!((xi0[(0, 0)] + a / q).abs() < 1e-15);
    }

    #[test]
    fn trivial_dynamics_give_identity() {
        let mut p = generate_case1_msd(2, 3, 2, 0);
        for row in &mut p.subsystems {
            for s in row {
                s.a.iter_mut().for_each(|m| *m = DenseMat::zeros(4, 4));
                s.b.iter_mut().for_each(|m| *m = DenseMat::zeros(4, 2));
                s.e = None;
                s.f = None;
                s.g = None;
                s.h = None;
            }
        }
        let sop = build_schur(&build_stacked(&p).unwrap());
        let d = sop.densify_delta(DEFAULT_DENSE_GUARD).unwrap();
        assert_eq!(d, DenseMat::identity(sop.dim()));
    }

    #[test]
    fn dense_guard_is_enforced() {
        let p = generate_case1_msd(2, 2, 2, 0);
        let sop = build_schur(&build_stacked(&p).unwrap());
        assert!(matches!(sop.densify_delta(10), Err(Error::DimensionGuard { dim: 48, limit: 10 })));
    }
}
