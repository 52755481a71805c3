//! Column-level closed forms of the `Ψ̂_{t+1}` blocks, computed from dense
//! column operators `Ā_j`, `Ē_j`, `F̄_j` of stage `t`. Used only to
//! cross-check the node-level assembly.

use super::StackedSystem;
use crate::block_linalg::{Block, BlockRef, DenseMat};

/// Closed-form column blocks of `Ψ̂_{t+1}` at column `j`.
#[derive(Clone, Debug)]
pub struct ClosedFormBlocks {
    /// `Z̄_j` including the `Q̄⁻¹` and `B̄ R̄⁻¹ B̄ᵀ` diagonal terms, i.e. `Ψ̂(j, j)`.
    pub z: DenseMat,
    /// `Ȳ_j = Ψ̂(j, j-1)`, for `j >= 1`.
    pub y: Option<DenseMat>,
    /// `V̄_j = Ψ̂(j, j-2)`, for `j >= 2`.
    pub v: Option<DenseMat>,
}

fn column_block(s: &StackedSystem, t: usize, r: usize, c: usize) -> DenseMat {
    let a = s.a_hat(t);
    match a.get(r, c) {
        Some(BlockRef::Direct(inner)) => inner.to_dense(),
        Some(BlockRef::Transposed(inner)) => inner.to_dense().transpose(),
        None => DenseMat::zeros(a.row_sizes()[r], a.col_sizes()[c]),
    }
}

fn column_diag(s: &StackedSystem, j: usize, f: impl Fn(usize) -> DenseMat, size: impl Fn(usize) -> usize) -> DenseMat {
    let l = s.layout();
    let total: usize = (0..l.rows()).map(|i| size(l.node(i, j))).sum();
    let mut out = DenseMat::zeros(total, total);
    let mut off = 0;
    for i in 0..l.rows() {
        let node = l.node(i, j);
        out.set_submatrix(off, off, &f(node));
        off += size(node);
    }
    out
}

/// Closed-form blocks of `Ψ̂_{t+1}` at column `j` from stage-`t` data.
pub fn closed_form_blocks(s: &StackedSystem, j: usize, t: usize) -> ClosedFormBlocks {
    let l = s.layout().clone();
    let n = l.cols();
    let qinv = |jj: usize, stage: usize| {
        column_diag(s, jj, |node| s.q_inv_block(stage, node).clone(), |node| l.node_state_dim(node))
    };
    let a_bar = |jj: usize| column_block(s, t, jj, jj);
    let e_bar = |jj: usize| column_block(s, t, jj, jj - 1);
    let f_bar = |jj: usize| column_block(s, t, jj, jj + 1);
    let sandwich = |x: &DenseMat, m: &DenseMat, y: &DenseMat| x.matmul(m).matmul_transposed(y);

    let mut z = sandwich(&a_bar(j), &qinv(j, t), &a_bar(j));
    if j > 0 {
        z.axpy(1.0, &sandwich(&e_bar(j), &qinv(j - 1, t), &e_bar(j)));
    }
    if j + 1 < n {
        z.axpy(1.0, &sandwich(&f_bar(j), &qinv(j + 1, t), &f_bar(j)));
    }
    z.axpy(1.0, &qinv(j, t + 1));
    let brb = column_diag(
        s,
        j,
        |node| {
            let b = s.b_block(t, node);
            b.matmul(s.r_inv_block(t, node)).matmul_transposed(b)
        },
        |node| l.node_state_dim(node),
    );
    z.axpy(1.0, &brb);

    let y = (j >= 1).then(|| {
        let mut y = sandwich(&e_bar(j), &qinv(j - 1, t), &a_bar(j - 1));
        y.axpy(1.0, &sandwich(&a_bar(j), &qinv(j, t), &f_bar(j - 1)));
        y
    });
    let v = (j >= 2).then(|| sandwich(&e_bar(j), &qinv(j - 1, t), &f_bar(j - 2)));
    ClosedFormBlocks { z, y, v }
}
