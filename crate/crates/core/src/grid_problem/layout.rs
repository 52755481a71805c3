use std::ops::Range;

use super::GridLQProblem;

/// Column pair used by the two-level splitting: columns `2v` and `2v + 1`
/// (a single column for the last pair when `N` is odd).
#[derive(Clone, Debug, PartialEq)]
pub struct PairLayout {
    pub columns: Range<usize>,
    /// Offsets of the pair's entries inside one time stage.
    pub stage_range: Range<usize>,
    /// Size of row block `i` of the interleaved ordering (sum over the pair's columns).
    pub row_block_sizes: Vec<usize>,
    /// `interleaved[k]` is the stage-relative position (within `stage_range`)
    /// of entry `k` of the row-interleaved ordering.
    pub interleaved: Vec<usize>,
}

impl PairLayout {
    pub fn len(&self) -> usize {
        self.stage_range.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stage_range.is_empty()
    }

    /// Copies the pair segment (column-major ordering) into row-interleaved order.
    pub fn gather(&self, segment: &[f64], out: &mut [f64]) {
        for (o, &p) in out.iter_mut().zip(&self.interleaved) {
            *o = segment[p];
        }
    }

    pub fn scatter(&self, interleaved: &[f64], segment: &mut [f64]) {
        for (v, &p) in interleaved.iter().zip(&self.interleaved) {
            segment[p] = *v;
        }
    }
}

/// Offsets of every state and input inside the stacked vectors.
///
/// Stage vectors `x̂_t` are ordered column by column (`j` outer) and then
/// row by row (`i` inner); the stacked `x̃` concatenates stages `0..=T` and
/// `ũ` stages `0..T`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridLayout {
    k: usize,
    n: usize,
    t: usize,
    state_dims: Vec<usize>,
    input_dims: Vec<usize>,
    state_node_offsets: Vec<usize>,
    input_node_offsets: Vec<usize>,
    column_offsets: Vec<usize>,
    input_column_offsets: Vec<usize>,
    n_hat: usize,
    m_hat: usize,
    pairs: Vec<PairLayout>,
}

/// Layout of the stacked state and input vectors of `p`.
pub fn state_offsets(p: &GridLQProblem) -> GridLayout {
    GridLayout::new(p)
}

impl GridLayout {
    pub fn new(p: &GridLQProblem) -> Self {
        let (k, n) = (p.k, p.n);
        let mut state_dims = Vec::with_capacity(k * n);
        let mut input_dims = Vec::with_capacity(k * n);
        for j in 0..n {
            for i in 0..k {
                state_dims.push(p.subsystems[i][j].n);
                input_dims.push(p.subsystems[i][j].m);
            }
        }
        Self::from_dims(k, n, p.t, state_dims, input_dims)
    }

    /// Builds a layout from node-ordered (`j` outer, `i` inner) dimensions.
    pub fn from_dims(k: usize, n: usize, t: usize, state_dims: Vec<usize>, input_dims: Vec<usize>) -> Self {
        assert_eq!(state_dims.len(), k * n);
        assert_eq!(input_dims.len(), k * n);
        let prefix = |dims: &[usize]| {
            let mut out = Vec::with_capacity(dims.len() + 1);
            let mut acc = 0;
            out.push(0);
            for &d in dims {
                acc += d;
                out.push(acc);
            }
            out
        };
        let state_node_offsets = prefix(&state_dims);
        let input_node_offsets = prefix(&input_dims);
        let column_offsets: Vec<usize> = (0..=n).map(|j| state_node_offsets[j * k]).collect();
        let input_column_offsets: Vec<usize> = (0..=n).map(|j| input_node_offsets[j * k]).collect();
        let n_hat = state_node_offsets[k * n];
        let m_hat = input_node_offsets[k * n];

        let num_pairs = n.div_ceil(2);
        let mut pairs = Vec::with_capacity(num_pairs);
        for v in 0..num_pairs {
            let columns = 2 * v..(2 * v + 2).min(n);
            let start = column_offsets[columns.start];
            let stage_range = start..column_offsets[columns.end];
            let mut row_block_sizes = Vec::with_capacity(k);
            let mut interleaved = Vec::with_capacity(stage_range.len());
            for i in 0..k {
                let mut size = 0;
                for j in columns.clone() {
                    let node = j * k + i;
                    let off = state_node_offsets[node] - start;
                    interleaved.extend(off..off + state_dims[node]);
                    size += state_dims[node];
                }
                row_block_sizes.push(size);
            }
            pairs.push(PairLayout { columns, stage_range, row_block_sizes, interleaved });
        }

        Self {
            k,
            n,
            t,
            state_dims,
            input_dims,
            state_node_offsets,
            input_node_offsets,
            column_offsets,
            input_column_offsets,
            n_hat,
            m_hat,
            pairs,
        }
    }

    pub fn rows(&self) -> usize {
        self.k
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.t
    }

    /// Number of time stages of `x̃` (`T + 1`).
    pub fn num_stages(&self) -> usize {
        self.t + 1
    }

    /// Node index of `(i, j)`.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * self.k + i
    }

    /// `(i, j)` of a node index.
    #[inline]
    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        (node % self.k, node / self.k)
    }

    pub fn num_nodes(&self) -> usize {
        self.k * self.n
    }

    pub fn state_dim(&self, i: usize, j: usize) -> usize {
        self.state_dims[self.node(i, j)]
    }

    pub fn input_dim(&self, i: usize, j: usize) -> usize {
        self.input_dims[self.node(i, j)]
    }

    pub fn node_state_dim(&self, node: usize) -> usize {
        self.state_dims[node]
    }

    pub fn node_input_dim(&self, node: usize) -> usize {
        self.input_dims[node]
    }

    /// State dims of column `j`, one per row.
    pub fn column_state_dims(&self, j: usize) -> Vec<usize> {
        (0..self.k).map(|i| self.state_dim(i, j)).collect()
    }

    pub fn column_input_dims(&self, j: usize) -> Vec<usize> {
        (0..self.k).map(|i| self.input_dim(i, j)).collect()
    }

    /// `n̂`: states per stage.
    pub fn n_hat(&self) -> usize {
        self.n_hat
    }

    /// `m̂`: inputs per stage.
    pub fn m_hat(&self) -> usize {
        self.m_hat
    }

    /// `n̄_j`.
    pub fn n_bar(&self, j: usize) -> usize {
        self.column_offsets[j + 1] - self.column_offsets[j]
    }

    /// `m̄_j`.
    pub fn m_bar(&self, j: usize) -> usize {
        self.input_column_offsets[j + 1] - self.input_column_offsets[j]
    }

    /// `ñ = n̂ (T + 1)`.
    pub fn n_tilde(&self) -> usize {
        self.n_hat * (self.t + 1)
    }

    /// `m̃ = m̂ T`.
    pub fn m_tilde(&self) -> usize {
        self.m_hat * self.t
    }

    /// Offset of `x_{i,j}` inside `x̄_j`.
    pub fn offset_in_column(&self, i: usize, j: usize) -> usize {
        self.state_node_offsets[self.node(i, j)] - self.column_offsets[j]
    }

    /// Offset of `x_{i,j}` inside a stage vector `x̂_t`.
    pub fn state_offset_in_stage(&self, i: usize, j: usize) -> usize {
        self.state_node_offsets[self.node(i, j)]
    }

    pub fn node_state_range(&self, node: usize) -> Range<usize> {
        self.state_node_offsets[node]..self.state_node_offsets[node + 1]
    }

    pub fn node_input_range(&self, node: usize) -> Range<usize> {
        self.input_node_offsets[node]..self.input_node_offsets[node + 1]
    }

    /// Offset of `x_{i,j,t}` inside `x̃`.
    pub fn state_offset(&self, i: usize, j: usize, t: usize) -> usize {
        t * self.n_hat + self.state_offset_in_stage(i, j)
    }

    /// Offset of `u_{i,j,t}` inside `ũ`; there is no input at `t = T`.
    pub fn input_offset(&self, i: usize, j: usize, t: usize) -> Option<usize> {
        (t < self.t).then(|| t * self.m_hat + self.input_node_offsets[self.node(i, j)])
    }

    pub fn stage_range(&self, t: usize) -> Range<usize> {
        t * self.n_hat..(t + 1) * self.n_hat
    }

    pub fn input_stage_range(&self, t: usize) -> Range<usize> {
        t * self.m_hat..(t + 1) * self.m_hat
    }

    /// Range of `x̄_j` inside a stage.
    pub fn column_range(&self, j: usize) -> Range<usize> {
        self.column_offsets[j]..self.column_offsets[j + 1]
    }

    /// `V`.
    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn pair(&self, v: usize) -> &PairLayout {
        &self.pairs[v]
    }

    pub fn pairs(&self) -> &[PairLayout] {
        &self.pairs
    }

    pub fn pair_of_column(&self, j: usize) -> usize {
        j / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(k: usize, n: usize, t: usize, nx: usize, nu: usize) -> GridLayout {
        GridLayout::from_dims(k, n, t, vec![nx; k * n], vec![nu; k * n])
    }

    #[test]
    fn single_subsystem_offsets() {
        let l = uniform(1, 1, 3, 4, 2);
        for t in 0..=3 {
            assert_eq!(l.state_offset(0, 0, t), 4 * t);
        }
        assert_eq!(l.input_offset(0, 0, 2), Some(4));
        assert_eq!(l.input_offset(0, 0, 3), None);
    }

    #[test]
    fn two_by_two_offsets() {
        let l = uniform(2, 2, 2, 4, 2);
        assert_eq!(l.n_bar(0), 8);
        assert_eq!(l.n_hat(), 16);
        // x_{2,1,0} in one-based notation is row 1, column 0 here.
        assert_eq!(l.state_offset(1, 0, 0), 4);
        assert_eq!(l.n_tilde(), 48);
        assert_eq!(l.m_tilde(), 16);
        assert_eq!(l.input_offset(1, 1, 1), Some(8 + 6));
        assert_eq!(l.input_offset(0, 0, 2), None);
    }

    #[test]
    fn pairing_counts() {
        assert_eq!(uniform(2, 1, 1, 1, 1).num_pairs(), 1);
        assert_eq!(uniform(2, 3, 1, 1, 1).num_pairs(), 2);
        assert_eq!(uniform(2, 4, 1, 1, 1).num_pairs(), 2);
        let l = uniform(2, 3, 1, 1, 1);
        assert_eq!(l.pair(1).columns, 2..3);
    }

    #[test]
    fn interleaving_is_a_permutation() {
        let l = GridLayout::from_dims(3, 2, 1, vec![1, 2, 3, 2, 1, 2], vec![1; 6]);
        let p = l.pair(0);
        assert_eq!(p.row_block_sizes, vec![3, 3, 5]);
        let mut seen = p.interleaved.clone();
        seen.sort_unstable();
        assert_eq!(seen, (0..p.len()).collect::<Vec<_>>());
        // Row 0: column 0 (offset 0, dim 1) then column 1 (offset 6, dim 2).
        assert_eq!(&p.interleaved[..3], &[0, 6, 7]);
        let seg: Vec<f64> = (0..p.len()).map(|v| v as f64).collect();
        let mut inter = vec![0.0; p.len()];
        p.gather(&seg, &mut inter);
        let mut back = vec![0.0; p.len()];
        p.scatter(&inter, &mut back);
        assert_eq!(back, seg);
    }
}
