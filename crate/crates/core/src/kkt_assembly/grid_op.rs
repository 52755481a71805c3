//! Two-level block storage of stage operators: outer blocks over grid
//! columns `j`, each an inner block-banded matrix over rows `i`.

use crate::block_linalg::{Block, BlockBandedMat, BlockRef, DenseMat};
use crate::grid_problem::GridLayout;

/// Stage operator with outer blocks over `j` and inner blocks over `i`.
pub type GridBlockMat = BlockBandedMat<BlockBandedMat<DenseMat>>;

/// Empty operator whose nonzeros are confined to Manhattan distance
/// `reach` between nodes: outer bandwidth `reach`, inner bandwidth
/// `reach - |Δj|`.
pub(crate) fn new_grid_op(layout: &GridLayout, reach: usize, symmetric: bool) -> GridBlockMat {
    let sizes: Vec<usize> = (0..layout.cols()).map(|j| layout.n_bar(j)).collect();
    let outer_bw = reach.min(layout.cols().saturating_sub(1));
    if symmetric {
        BlockBandedMat::new_symmetric(sizes, outer_bw)
    } else {
        BlockBandedMat::new(sizes.clone(), sizes, outer_bw)
    }
}

fn new_inner(layout: &GridLayout, reach: usize, jr: usize, jc: usize, symmetric: bool) -> BlockBandedMat<DenseMat> {
    let bw = (reach - jr.abs_diff(jc)).min(layout.rows().saturating_sub(1));
    if symmetric && jr == jc {
        BlockBandedMat::new_symmetric(layout.column_state_dims(jr), bw)
    } else {
        BlockBandedMat::new(layout.column_state_dims(jr), layout.column_state_dims(jc), bw)
    }
}

/// Adds `alpha * m` into node block `(p, q)`. Symmetric operators require
/// `p >= q` in node order.
pub(crate) fn add_node_block(
    op: &mut GridBlockMat,
    layout: &GridLayout,
    reach: usize,
    p: usize,
    q: usize,
    alpha: f64,
    m: &DenseMat,
) {
    let (ip, jp) = layout.node_coords(p);
    let (iq, jq) = layout.node_coords(q);
    let symmetric = op.is_symmetric();
    debug_assert!(!symmetric || p >= q);
    let inner = op.get_or_insert_with(jp, jq, || new_inner(layout, reach, jp, jq, symmetric));
    inner.add_block(ip, iq, alpha, m);
}

/// Logical node block `(p, q)`, resolving symmetric storage at both levels.
pub fn node_block(op: &GridBlockMat, layout: &GridLayout, p: usize, q: usize) -> Option<DenseMat> {
    let (ip, jp) = layout.node_coords(p);
    let (iq, jq) = layout.node_coords(q);
    let resolve = |inner: &BlockBandedMat<DenseMat>, r: usize, c: usize| match inner.get(r, c)? {
        BlockRef::Direct(b) => Some(b.clone()),
        BlockRef::Transposed(b) => Some(b.transpose()),
    };
    match op.get(jp, jq)? {
        BlockRef::Direct(inner) => resolve(inner, ip, iq),
        BlockRef::Transposed(inner) => resolve(inner, iq, ip).map(|b| b.transpose()),
    }
}

/// Every stored node block `(p, q, block)` of a non-symmetric operator.
pub(crate) fn stored_node_blocks<'a>(
    op: &'a GridBlockMat,
    layout: &'a GridLayout,
) -> impl Iterator<Item = (usize, usize, &'a DenseMat)> + 'a {
    op.iter_stored().flat_map(move |(jr, jc, inner)| {
        inner.iter_stored().map(move |(ir, ic, b)| (layout.node(ir, jr), layout.node(ic, jc), b))
    })
}

/// Total stored scalar entries, a proxy for memory traffic.
pub fn stored_entries(op: &GridBlockMat) -> usize {
    op.iter_stored()
        .map(|(_, _, inner)| inner.iter_stored().map(|(_, _, b)| b.nrows() * b.ncols()).sum::<usize>())
        .sum()
}
