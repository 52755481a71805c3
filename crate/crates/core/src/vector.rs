use std::ops::Range;
use std::sync::Arc;

use crate::block_linalg::LinalgError;
use crate::grid_problem::GridLayout;

/// Vector over the multiplier layout: stages `t = 0..=T`, each stage split
/// into pair segments `v`, each pair holding its columns' subsystems.
#[derive(Clone, Debug, PartialEq)]
pub struct StageBlockVector {
    layout: Arc<GridLayout>,
    data: Vec<f64>,
}

impl StageBlockVector {
    pub fn zeros(layout: Arc<GridLayout>) -> Self {
        let n = layout.n_tilde();
        Self { layout, data: vec![0.0; n] }
    }

    pub fn from_vec(layout: Arc<GridLayout>, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != layout.n_tilde() {
            return Err(LinalgError::DimensionMismatch { expected: layout.n_tilde(), found: data.len() });
        }
        Ok(Self { layout, data })
    }

    /// Unit vector `e_k`.
    pub fn unit(layout: Arc<GridLayout>, k: usize) -> Self {
        let mut v = Self::zeros(layout);
        v.data[k] = 1.0;
        v
    }

    pub fn layout(&self) -> &Arc<GridLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn stage(&self, t: usize) -> &[f64] {
        &self.data[self.layout.stage_range(t)]
    }

    pub fn stage_mut(&mut self, t: usize) -> &mut [f64] {
        let r = self.layout.stage_range(t);
        &mut self.data[r]
    }

    /// Global range of pair segment `(t, v)`.
    pub fn segment_range(&self, t: usize, v: usize) -> Range<usize> {
        let base = t * self.layout.n_hat();
        let r = &self.layout.pair(v).stage_range;
        base + r.start..base + r.end
    }

    pub fn segment(&self, t: usize, v: usize) -> &[f64] {
        &self.data[self.segment_range(t, v)]
    }

    /// Block of subsystem `(i, j)` at stage `t`.
    pub fn block(&self, i: usize, j: usize, t: usize) -> &[f64] {
        let off = self.layout.state_offset(i, j, t);
        &self.data[off..off + self.layout.state_dim(i, j)]
    }

    /// Sequential left-to-right dot product.
    pub fn dot(&self, other: &Self) -> f64 {
        crate::block_linalg::dot(&self.data, &other.data)
    }

    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.data)
    }

    /// `self += alpha * x`.
    pub fn axpy(&mut self, alpha: f64, x: &Self) {
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += alpha * v;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn sub(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { layout: self.layout.clone(), data }
    }

    pub fn add(&self, other: &Self) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { layout: self.layout.clone(), data }
    }
}

pub(crate) fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Splits a stacked vector into its `(t, v)` pair segments, `t` outer.
pub(crate) fn pair_segments_mut<'a>(layout: &GridLayout, data: &'a mut [f64]) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(layout.num_stages() * layout.num_pairs());
    let mut rest = data;
    for _ in 0..layout.num_stages() {
        for p in layout.pairs() {
            let (seg, tail) = rest.split_at_mut(p.len());
            out.push(seg);
            rest = tail;
        }
    }
    out
}

/// Splits a stacked vector into its `(t, j)` column segments, `t` outer.
pub(crate) fn column_segments_mut<'a>(layout: &GridLayout, data: &'a mut [f64]) -> Vec<&'a mut [f64]> {
    let mut out = Vec::with_capacity(layout.num_stages() * layout.cols());
    let mut rest = data;
    for _ in 0..layout.num_stages() {
        for j in 0..layout.cols() {
            let (seg, tail) = rest.split_at_mut(layout.n_bar(j));
            out.push(seg);
            rest = tail;
        }
    }
    out
}
