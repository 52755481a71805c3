//! Block-banded matrices and their block Cholesky factorisation.
//!
//! `BlockBandedMat` is generic over its block type so that the same
//! container holds both a banded matrix of dense blocks and a banded matrix
//! whose blocks are themselves banded (the nested column/row structure of
//! the grid operators).

use super::dense::{
    backward_substitute_transposed, dense_cholesky, forward_substitute, right_solve_lower_transposed, DenseMat,
};
use super::LinalgError;

/// A linear map usable as a block of a [`BlockBandedMat`].
pub trait Block: Clone + Send + Sync + std::fmt::Debug {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y += alpha * B x`, returning the flop count.
    fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64;
    /// `y += alpha * Bᵀ x`, returning the flop count.
    fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64;
    fn to_dense(&self) -> DenseMat;
}

impl Block for DenseMat {
    fn nrows(&self) -> usize {
        self.rows()
    }

    fn ncols(&self) -> usize {
        self.cols()
    }

    #[inline]
    fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64 {
        DenseMat::gemv(self, alpha, x, y)
    }

    #[inline]
    fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64 {
        DenseMat::gemv_t(self, alpha, x, y)
    }

    fn to_dense(&self) -> DenseMat {
        self.clone()
    }
}

fn prefix_offsets(sizes: &[usize]) -> Vec<usize> {
    let mut offsets = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    offsets.push(0);
    for &s in sizes {
        acc += s;
        offsets.push(acc);
    }
    offsets
}

/// Stored block, possibly seen through a transpose (symmetric storage).
#[derive(Clone, Copy, Debug)]
pub enum BlockRef<'a, B> {
    Direct(&'a B),
    Transposed(&'a B),
}

/// Square-in-blocks banded matrix. Block `(r, c)` may be present only when
/// `|r - c| <= bandwidth`. A symmetric instance stores only `c <= r` and
/// exposes `(r, c)` as the transpose of `(c, r)`.
#[derive(Clone, Debug)]
pub struct BlockBandedMat<B: Block = DenseMat> {
    row_sizes: Vec<usize>,
    col_sizes: Vec<usize>,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
    bandwidth: usize,
    symmetric: bool,
    blocks: Vec<Option<B>>,
}

impl<B: Block> BlockBandedMat<B> {
    /// General (non-symmetric) banded matrix, possibly rectangular inside each block.
    pub fn new(row_sizes: Vec<usize>, col_sizes: Vec<usize>, bandwidth: usize) -> Self {
        assert_eq!(row_sizes.len(), col_sizes.len(), "block row/col counts differ");
        let nb = row_sizes.len();
        Self {
            row_offsets: prefix_offsets(&row_sizes),
            col_offsets: prefix_offsets(&col_sizes),
            row_sizes,
            col_sizes,
            bandwidth,
            symmetric: false,
            blocks: vec![None; nb * (2 * bandwidth + 1)],
        }
    }

    /// Symmetric banded matrix; only the lower block triangle is stored.
    pub fn new_symmetric(sizes: Vec<usize>, bandwidth: usize) -> Self {
        let mut m = Self::new(sizes.clone(), sizes, bandwidth);
        m.symmetric = true;
        m
    }

    pub fn num_block_rows(&self) -> usize {
        self.row_sizes.len()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn row_sizes(&self) -> &[usize] {
        &self.row_sizes
    }

    pub fn col_sizes(&self) -> &[usize] {
        &self.col_sizes
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_offsets(&self) -> &[usize] {
        &self.col_offsets
    }

    pub fn total_rows(&self) -> usize {
        *self.row_offsets.last().unwrap()
    }

    pub fn total_cols(&self) -> usize {
        *self.col_offsets.last().unwrap()
    }

    fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.num_block_rows() && c < self.num_block_rows() && r.abs_diff(c) <= self.bandwidth
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        r * (2 * self.bandwidth + 1) + (c + self.bandwidth - r)
    }

    /// Stored block at `(r, c)`; for symmetric matrices only `c <= r` is stored.
    pub fn stored(&self, r: usize, c: usize) -> Option<&B> {
        if !self.in_band(r, c) {
            return None;
        }
        self.blocks[self.slot(r, c)].as_ref()
    }

    pub fn stored_mut(&mut self, r: usize, c: usize) -> Option<&mut B> {
        if !self.in_band(r, c) {
            return None;
        }
        let s = self.slot(r, c);
        self.blocks[s].as_mut()
    }

    /// Logical block `(r, c)`, resolving symmetric storage.
    pub fn get(&self, r: usize, c: usize) -> Option<BlockRef<'_, B>> {
        if self.symmetric && c > r {
            self.stored(c, r).map(BlockRef::Transposed)
        } else {
            self.stored(r, c).map(BlockRef::Direct)
        }
    }

    fn check_slot(&self, r: usize, c: usize, block: &B) -> Result<(), LinalgError> {
        if !self.in_band(r, c) || (self.symmetric && c > r) {
            return Err(LinalgError::OutsideBand { row: r, col: c, bandwidth: self.bandwidth });
        }
        if block.nrows() != self.row_sizes[r] || block.ncols() != self.col_sizes[c] {
            return Err(LinalgError::BlockShape {
                row: r,
                col: c,
                expected: (self.row_sizes[r], self.col_sizes[c]),
                found: (block.nrows(), block.ncols()),
            });
        }
        Ok(())
    }

    pub fn insert(&mut self, r: usize, c: usize, block: B) -> Result<(), LinalgError> {
        self.check_slot(r, c, &block)?;
        let s = self.slot(r, c);
        self.blocks[s] = Some(block);
        Ok(())
    }

    /// Mutable access to block `(r, c)`, creating it with `init` when absent.
    pub fn get_or_insert_with(&mut self, r: usize, c: usize, init: impl FnOnce() -> B) -> &mut B {
        assert!(
            self.in_band(r, c) && !(self.symmetric && c > r),
            "block ({r}, {c}) outside stored band"
        );
        let s = self.slot(r, c);
        if self.blocks[s].is_none() {
            let b = init();
            assert_eq!((b.nrows(), b.ncols()), (self.row_sizes[r], self.col_sizes[c]), "block shape");
            self.blocks[s] = Some(b);
        }
        self.blocks[s].as_mut().unwrap()
    }

    /// Iterates stored blocks as `(r, c, block)` in row-major band order.
    pub fn iter_stored(&self) -> impl Iterator<Item = (usize, usize, &B)> + '_ {
        let w = 2 * self.bandwidth + 1;
        self.blocks.iter().enumerate().filter_map(move |(s, b)| {
            b.as_ref().map(|b| {
                let r = s / w;
                let c = r + (s % w) - self.bandwidth;
                (r, c, b)
            })
        })
    }

    pub fn stored_block_count(&self) -> usize {
        self.blocks.iter().filter(|b| b.is_some()).count()
    }

    /// `y += alpha * M x` restricted to stored blocks.
    pub fn gemv_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64 {
        debug_assert_eq!(x.len(), self.total_cols());
        debug_assert_eq!(y.len(), self.total_rows());
        let mut flops = 0;
        for (r, c, b) in self.iter_stored() {
            let (r0, r1) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let (c0, c1) = (self.col_offsets[c], self.col_offsets[c + 1]);
            flops += b.gemv(alpha, &x[c0..c1], &mut y[r0..r1]);
            if self.symmetric && c != r {
                flops += b.gemv_t(alpha, &x[r0..r1], &mut y[c0..c1]);
            }
        }
        flops
    }

    /// `y += alpha * Mᵀ x`.
    pub fn gemv_t_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64 {
        if self.symmetric {
            return self.gemv_add(alpha, x, y);
        }
        debug_assert_eq!(x.len(), self.total_rows());
        debug_assert_eq!(y.len(), self.total_cols());
        let mut flops = 0;
        for (r, c, b) in self.iter_stored() {
            let (r0, r1) = (self.row_offsets[r], self.row_offsets[r + 1]);
            let (c0, c1) = (self.col_offsets[c], self.col_offsets[c + 1]);
            flops += b.gemv_t(alpha, &x[r0..r1], &mut y[c0..c1]);
        }
        flops
    }

    /// `y_r += alpha * (M x)_r` for block row `r`; `x` is the full input.
    pub fn row_gemv_add(&self, r: usize, alpha: f64, x: &[f64], y_r: &mut [f64]) -> u64 {
        let nb = self.num_block_rows();
        let mut flops = 0;
        for c in r.saturating_sub(self.bandwidth)..(r + self.bandwidth + 1).min(nb) {
            let xc = &x[self.col_offsets[c]..self.col_offsets[c + 1]];
            flops += match self.get(r, c) {
                Some(BlockRef::Direct(b)) => b.gemv(alpha, xc, y_r),
                Some(BlockRef::Transposed(b)) => b.gemv_t(alpha, xc, y_r),
                None => 0,
            };
        }
        flops
    }

    /// `y_c += alpha * (Mᵀ x)_c` for block column `c`; `x` is the full input.
    pub fn col_gemv_t_add(&self, c: usize, alpha: f64, x: &[f64], y_c: &mut [f64]) -> u64 {
        if self.symmetric {
            return self.row_gemv_add(c, alpha, x, y_c);
        }
        let nb = self.num_block_rows();
        let mut flops = 0;
        for r in c.saturating_sub(self.bandwidth)..(c + self.bandwidth + 1).min(nb) {
            if let Some(b) = self.stored(r, c) {
                flops += b.gemv_t(alpha, &x[self.row_offsets[r]..self.row_offsets[r + 1]], y_c);
            }
        }
        flops
    }

    /// Same structure with every stored block mapped through `f`.
    pub fn map_blocks<C: Block>(&self, f: impl Fn(&B) -> C) -> BlockBandedMat<C> {
        BlockBandedMat {
            row_sizes: self.row_sizes.clone(),
            col_sizes: self.col_sizes.clone(),
            row_offsets: self.row_offsets.clone(),
            col_offsets: self.col_offsets.clone(),
            bandwidth: self.bandwidth,
            symmetric: self.symmetric,
            blocks: self.blocks.iter().map(|b| b.as_ref().map(&f)).collect(),
        }
    }

    pub fn densify(&self) -> DenseMat {
        let mut out = DenseMat::zeros(self.total_rows(), self.total_cols());
        for (r, c, b) in self.iter_stored() {
            let d = b.to_dense();
            out.set_submatrix(self.row_offsets[r], self.col_offsets[c], &d);
            if self.symmetric && r != c {
                out.set_submatrix(self.col_offsets[c], self.row_offsets[r], &d.transpose());
            }
        }
        out
    }
}

impl BlockBandedMat<DenseMat> {
    /// Adds `alpha * block` into `(r, c)`; for symmetric storage with
    /// `c > r` the transpose is added into `(c, r)`.
    pub fn add_block(&mut self, r: usize, c: usize, alpha: f64, block: &DenseMat) {
        if self.symmetric && c > r {
            let (rs, cs) = (self.row_sizes[c], self.col_sizes[r]);
            self.get_or_insert_with(c, r, || DenseMat::zeros(rs, cs)).axpy_transposed(alpha, block);
        } else {
            let (rs, cs) = (self.row_sizes[r], self.col_sizes[c]);
            self.get_or_insert_with(r, c, || DenseMat::zeros(rs, cs)).axpy(alpha, block);
        }
    }

    /// Logical block `(r, c)` as an owned dense matrix (zero when absent).
    pub fn block_dense(&self, r: usize, c: usize) -> DenseMat {
        match self.get(r, c) {
            Some(BlockRef::Direct(b)) => b.clone(),
            Some(BlockRef::Transposed(b)) => b.transpose(),
            None => DenseMat::zeros(self.row_sizes[r], self.col_sizes[c]),
        }
    }
}

impl<B: Block> Block for BlockBandedMat<B> {
    fn nrows(&self) -> usize {
        self.total_rows()
    }

    fn ncols(&self) -> usize {
        self.total_cols()
    }

    fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64 {
        self.gemv_add(alpha, x, y)
    }

    fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64 {
        self.gemv_t_add(alpha, x, y)
    }

    fn to_dense(&self) -> DenseMat {
        self.densify()
    }
}

/// `M x` touching only stored blocks.
pub fn banded_matvec<B: Block>(m: &BlockBandedMat<B>, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
    if x.len() != m.total_cols() {
        return Err(LinalgError::DimensionMismatch { expected: m.total_cols(), found: x.len() });
    }
    let mut y = vec![0.0; m.total_rows()];
    m.gemv_add(1.0, x, &mut y);
    Ok(y)
}

/// Block Cholesky factor `L` (lower block-banded, same bandwidth) of a
/// symmetric positive definite block-banded matrix.
#[derive(Clone, Debug)]
pub struct BlockCholeskyFactor {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    bandwidth: usize,
    // lower[r * (b + 1) + (r - c)] = L(r, c)
    lower: Vec<Option<DenseMat>>,
    factor_flops: u64,
}

impl BlockCholeskyFactor {
    /// Factors a symmetric block-banded SPD matrix. Cost is linear in the
    /// number of block rows for fixed block size and bandwidth.
    pub fn new(m: &BlockBandedMat<DenseMat>) -> Result<Self, LinalgError> {
        if !m.is_symmetric() {
            return Err(LinalgError::NotSymmetric);
        }
        let nb = m.num_block_rows();
        let b = m.bandwidth();
        let sizes = m.row_sizes().to_vec();
        let mut lower: Vec<Option<DenseMat>> = vec![None; nb * (b + 1)];
        let idx = |r: usize, c: usize| r * (b + 1) + (r - c);
        let mut flops = 0u64;
        for r in 0..nb {
            let c_start = r.saturating_sub(b);
            for c in c_start..=r {
                let mut s = m.block_dense(r, c);
                for k in c_start..c {
                    if let (Some(lrk), Some(lck)) = (&lower[idx(r, k)], &lower[idx(c, k)]) {
                        s.axpy(-1.0, &lrk.matmul_transposed(lck));
                        flops += 2 * (sizes[r] * sizes[c] * sizes[k]) as u64;
                    }
                }
                if c == r {
                    let l = dense_cholesky(&s).map_err(|e| match e {
                        LinalgError::NotPositiveDefinite { pivot, value } => LinalgError::NotPositiveDefinite {
                            pivot: m.row_offsets()[r] + pivot,
                            value,
                        },
                        other => other,
                    })?;
                    flops += (sizes[r].pow(3) / 3) as u64;
                    lower[idx(r, r)] = Some(l);
                } else {
                    let lcc = lower[idx(c, c)].as_ref().unwrap();
                    flops += (sizes[r] * sizes[c] * sizes[c]) as u64;
                    lower[idx(r, c)] = Some(right_solve_lower_transposed(&s, lcc));
                }
            }
        }
        Ok(Self { offsets: m.row_offsets().to_vec(), sizes, bandwidth: b, lower, factor_flops: flops })
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn factor_flops(&self) -> u64 {
        self.factor_flops
    }

    fn l(&self, r: usize, c: usize) -> Option<&DenseMat> {
        if c > r || r - c > self.bandwidth {
            return None;
        }
        self.lower[r * (self.bandwidth + 1) + (r - c)].as_ref()
    }

    /// Solves `L Lᵀ x = b` in place; returns the flop count.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<u64, LinalgError> {
        if x.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let nb = self.sizes.len();
        let mut flops = 0u64;
        // Forward: L y = b.
        for r in 0..nb {
            let (r0, r1) = (self.offsets[r], self.offsets[r + 1]);
            for c in r.saturating_sub(self.bandwidth)..r {
                let (c0, c1) = (self.offsets[c], self.offsets[c + 1]);
                let (head, tail) = x.split_at_mut(r0);
                flops += self.l(r, c).unwrap().gemv(-1.0, &head[c0..c1], &mut tail[..r1 - r0]);
            }
            let lrr = self.l(r, r).unwrap();
            forward_substitute(lrr, &mut x[r0..r1]);
            flops += (self.sizes[r] * self.sizes[r]) as u64;
        }
        // Backward: Lᵀ x = y.
        for r in (0..nb).rev() {
            let (r0, r1) = (self.offsets[r], self.offsets[r + 1]);
            for k in r + 1..(r + 1 + self.bandwidth).min(nb) {
                let (k0, k1) = (self.offsets[k], self.offsets[k + 1]);
                let (head, tail) = x.split_at_mut(k0);
                flops += self.l(k, r).unwrap().gemv_t(-1.0, &tail[..k1 - k0], &mut head[r0..r1]);
            }
            backward_substitute_transposed(self.l(r, r).unwrap(), &mut x[r0..r1]);
            flops += (self.sizes[r] * self.sizes[r]) as u64;
        }
        Ok(flops)
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Dense lower-triangular factor `L`.
    pub fn densify(&self) -> DenseMat {
        let n = self.dim();
        let mut out = DenseMat::zeros(n, n);
        let nb = self.sizes.len();
        for r in 0..nb {
            for c in r.saturating_sub(self.bandwidth)..=r {
                if let Some(l) = self.l(r, c) {
                    out.set_submatrix(self.offsets[r], self.offsets[c], l);
                }
            }
        }
        out
    }
}

/// Factorisation entry point for the block-banded SPD systems. Block
/// tri-diagonal input is the common case, but any bandwidth is accepted.
pub fn block_tridiag_factor(m: &BlockBandedMat<DenseMat>) -> Result<BlockCholeskyFactor, LinalgError> {
    BlockCholeskyFactor::new(m)
}

pub fn block_tridiag_solve(f: &BlockCholeskyFactor, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    f.solve(b)
}

/// Alias of [`block_tridiag_factor`].
pub fn block_banded_factor(m: &BlockBandedMat<DenseMat>) -> Result<BlockCholeskyFactor, LinalgError> {
    BlockCholeskyFactor::new(m)
}

pub fn block_banded_solve(f: &BlockCholeskyFactor, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    f.solve(b)
}
