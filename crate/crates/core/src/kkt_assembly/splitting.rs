use std::sync::Arc;

use super::grid_op::node_block;
use super::schur::check_guard;
use super::SchurOperator;
use crate::block_linalg::{Block, BlockBandedMat, BlockRef, DenseMat};
use crate::grid_problem::GridLayout;
use crate::Error;

/// Column-level blocks coupling pair `v` to pair `v - 1`:
/// `Ω̄_v = -Ψ̂[pair v, pair v-1]`.
///
/// `blocks[a][b]` couples column `2v + a` to column `2v - 2 + b`. The
/// `[1][0]` entry spans distance 3 and is always absent, as is row 1 when
/// pair `v` is a singleton.
#[derive(Clone, Debug)]
pub struct PairCoupling {
    pub blocks: [[Option<BlockBandedMat<DenseMat>>; 2]; 2],
}

impl PairCoupling {
    /// `y += Ω̄ x`, `x` over pair `v - 1`, `y` over pair `v` (column order).
    pub fn gemv_add(&self, layout: &GridLayout, v: usize, x: &[f64], y: &mut [f64]) -> u64 {
        let (rows, cols) = (layout.pair(v), layout.pair(v - 1));
        let mut flops = 0;
        for (a, row) in self.blocks.iter().enumerate() {
            for (b, blk) in row.iter().enumerate() {
                let Some(m) = blk else { continue };
                let yr = local(layout, rows.stage_range.start, rows.columns.start + a);
                let xr = local(layout, cols.stage_range.start, cols.columns.start + b);
                flops += m.gemv_add(1.0, &x[xr], &mut y[yr]);
            }
        }
        flops
    }

    /// `y += Ω̄ᵀ x`, `x` over pair `v`, `y` over pair `v - 1`.
    pub fn gemv_t_add(&self, layout: &GridLayout, v: usize, x: &[f64], y: &mut [f64]) -> u64 {
        let (rows, cols) = (layout.pair(v), layout.pair(v - 1));
        let mut flops = 0;
        for (a, row) in self.blocks.iter().enumerate() {
            for (b, blk) in row.iter().enumerate() {
                let Some(m) = blk else { continue };
                let xr = local(layout, rows.stage_range.start, rows.columns.start + a);
                let yr = local(layout, cols.stage_range.start, cols.columns.start + b);
                flops += m.gemv_t_add(1.0, &x[xr], &mut y[yr]);
            }
        }
        flops
    }
}

fn local(layout: &GridLayout, pair_start: usize, j: usize) -> std::ops::Range<usize> {
    let r = layout.column_range(j);
    r.start - pair_start..r.end - pair_start
}

/// Pair splitting `Ψ̂_t = Φ̂_t - Ω̂_t` of every stage.
///
/// `Φ̄_{v,t}` is the diagonal block of `Ψ̂_t` over the columns of pair `v`,
/// stored in row-interleaved order (block row `i` holds `x_{i,2v}` then
/// `x_{i,2v+1}`), which makes it block banded with bandwidth 2 over `i`.
#[derive(Clone, Debug)]
pub struct SplitOperator {
    layout: Arc<GridLayout>,
    phi: Vec<Vec<BlockBandedMat<DenseMat>>>,
    omega: Vec<Vec<Option<PairCoupling>>>,
}

/// Extracts `Φ̄_{v,t}` and `Ω̄_{v,t}` from the assembled `Ψ̂_t`.
pub fn build_splitting(sop: &SchurOperator) -> SplitOperator {
    let layout = sop.layout().clone();
    let l = &*layout;
    let mut phi = Vec::with_capacity(l.num_stages());
    let mut omega = Vec::with_capacity(l.num_stages());
    for t in 0..l.num_stages() {
        let psi = sop.psi(t);
        let mut phis = Vec::with_capacity(l.num_pairs());
        let mut omegas = Vec::with_capacity(l.num_pairs());
        for (v, pair) in l.pairs().iter().enumerate() {
            let bw = 2.min(l.rows() - 1);
            let mut m = BlockBandedMat::new_symmetric(pair.row_block_sizes.clone(), bw);
            for i in 0..l.rows() {
                for i2 in i.saturating_sub(bw)..=i {
                    let mut blk = DenseMat::zeros(pair.row_block_sizes[i], pair.row_block_sizes[i2]);
                    let mut nonzero = false;
                    let mut ro = 0;
                    for ja in pair.columns.clone() {
                        let mut co = 0;
                        for jb in pair.columns.clone() {
                            if let Some(b) = node_block(psi, l, l.node(i, ja), l.node(i2, jb)) {
                                blk.set_submatrix(ro, co, &b);
                                nonzero = true;
                            }
                            co += l.state_dim(i2, jb);
                        }
                        ro += l.state_dim(i, ja);
                    }
                    if nonzero {
                        m.insert(i, i2, blk).expect("pair block lies in band");
                    }
                }
            }
            phis.push(m);

            omegas.push((v > 0).then(|| {
                let mut blocks: [[Option<BlockBandedMat<DenseMat>>; 2]; 2] = Default::default();
                for (a, ja) in pair.columns.clone().enumerate() {
                    for (b, jb) in l.pair(v - 1).columns.clone().enumerate() {
                        if let Some(BlockRef::Direct(inner)) = psi.get(ja, jb) {
                            blocks[a][b] = Some(inner.map_blocks(|m| m.scaled(-1.0)));
                        }
                    }
                }
                PairCoupling { blocks }
            }));
        }
        phi.push(phis);
        omega.push(omegas);
    }
    SplitOperator { layout, phi, omega }
}

impl SplitOperator {
    pub fn layout(&self) -> &Arc<GridLayout> {
        &self.layout
    }

    /// `Φ̄_{v,t}` in row-interleaved order.
    pub fn phi(&self, v: usize, t: usize) -> &BlockBandedMat<DenseMat> {
        &self.phi[t][v]
    }

    /// `Ω̄_{v,t}`; `None` for `v = 0`.
    pub fn omega(&self, v: usize, t: usize) -> Option<&PairCoupling> {
        self.omega[t][v].as_ref()
    }

    /// Dense `Φ̄_{v,t}` permuted back to column order.
    pub fn phi_dense_column_order(&self, v: usize, t: usize) -> DenseMat {
        let pair = self.layout.pair(v);
        let inter = self.phi[t][v].to_dense();
        let mut out = DenseMat::zeros(pair.len(), pair.len());
        for (a, &pa) in pair.interleaved.iter().enumerate() {
            for (b, &pb) in pair.interleaved.iter().enumerate() {
                out[(pa, pb)] = inter[(a, b)];
            }
        }
        out
    }

    /// Dense `Ω̄_{v,t}` in column order, rows over pair `v`, columns over pair `v - 1`.
    pub fn omega_dense(&self, v: usize, t: usize) -> Option<DenseMat> {
        let l = &*self.layout;
        let w = self.omega(v, t)?;
        let (rows, cols) = (l.pair(v), l.pair(v - 1));
        let mut out = DenseMat::zeros(rows.len(), cols.len());
        for (a, row) in w.blocks.iter().enumerate() {
            for (b, blk) in row.iter().enumerate() {
                if let Some(m) = blk {
                    let r0 = local(l, rows.stage_range.start, rows.columns.start + a).start;
                    let c0 = local(l, cols.stage_range.start, cols.columns.start + b).start;
                    out.set_submatrix(r0, c0, &m.to_dense());
                }
            }
        }
        Some(out)
    }

    /// Dense `Φ̃ = blockdiag over (t, v)` of `Φ̄_{v,t}`.
    pub fn densify_phi(&self, guard: usize) -> Result<DenseMat, Error> {
        let l = &*self.layout;
        check_guard(l.n_tilde(), guard)?;
        let mut d = DenseMat::zeros(l.n_tilde(), l.n_tilde());
        for t in 0..l.num_stages() {
            for (v, pair) in l.pairs().iter().enumerate() {
                let off = t * l.n_hat() + pair.stage_range.start;
                d.set_submatrix(off, off, &self.phi_dense_column_order(v, t));
            }
        }
        Ok(d)
    }

    /// Dense `Ω̃ = Φ̃ - Ψ̃`.
    pub fn densify_omega(&self, guard: usize) -> Result<DenseMat, Error> {
        let l = &*self.layout;
        check_guard(l.n_tilde(), guard)?;
        let mut d = DenseMat::zeros(l.n_tilde(), l.n_tilde());
        for t in 0..l.num_stages() {
            for v in 1..l.num_pairs() {
                let w = self.omega_dense(v, t).unwrap();
                let r0 = t * l.n_hat() + l.pair(v).stage_range.start;
                let c0 = t * l.n_hat() + l.pair(v - 1).stage_range.start;
                d.set_submatrix(r0, c0, &w);
                d.set_submatrix(c0, r0, &w.transpose());
            }
        }
        Ok(d)
    }
}
