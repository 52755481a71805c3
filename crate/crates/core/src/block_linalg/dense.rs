//! Small dense row-major matrices and the textbook kernels used on them.
//!
//! Block sizes in grid problems are the per-subsystem state/input
//! dimensions, so nothing here is cache-blocked or vectorised by hand.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use super::LinalgError;

/// Relative pivot threshold below which a Cholesky pivot is rejected.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// Dense real matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from a row-major entry list.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// `max|M - Mᵀ| <= tol * max(1, max|M|)`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(1.0);
        for i in 0..self.rows {
            for j in 0..i {
                if (self[(i, j)] - self[(j, i)]).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut m = self.clone();
        m.scale(alpha);
        m
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &DenseMat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "axpy shape");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// `self += alpha * otherᵀ`.
    pub fn axpy_transposed(&mut self, alpha: f64, other: &DenseMat) {
        assert_eq!((self.rows, self.cols), (other.cols, other.rows), "axpy_transposed shape");
        for i in 0..self.rows {
            for j in 0..self.cols {
                self.data[i * self.cols + j] += alpha * other[(j, i)];
            }
        }
    }

    pub fn sub(&self, other: &DenseMat) -> DenseMat {
        let mut m = self.clone();
        m.axpy(-1.0, other);
        m
    }

    pub fn add(&self, other: &DenseMat) -> DenseMat {
        let mut m = self.clone();
        m.axpy(1.0, other);
        m
    }

    pub fn matmul(&self, other: &DenseMat) -> DenseMat {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = DenseMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * otherᵀ`.
    pub fn matmul_transposed(&self, other: &DenseMat) -> DenseMat {
        assert_eq!(self.cols, other.cols, "matmul_transposed inner dimension");
        DenseMat::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    /// `y += alpha * M x`; returns the flop count.
    #[inline]
    pub fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64 {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += alpha * dot(self.row(i), x);
        }
        2 * (self.rows * self.cols) as u64
    }

    /// `y += alpha * Mᵀ x`; returns the flop count.
    #[inline]
    pub fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) -> u64 {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            let a = alpha * xi;
            if a == 0.0 {
                continue;
            }
            for (yj, m) in y.iter_mut().zip(self.row(i)) {
                *yj += a * m;
            }
        }
        2 * (self.rows * self.cols) as u64
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.gemv(1.0, x, &mut y);
        y
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = self`.
    pub fn cholesky(&self) -> Result<DenseMat, LinalgError> {
        dense_cholesky(self)
    }

    /// Inverse of a symmetric positive definite matrix, via Cholesky.
    pub fn spd_inverse(&self) -> Result<DenseMat, LinalgError> {
        let l = self.cholesky()?;
        let n = self.rows;
        let mut inv = DenseMat::zeros(n, n);
        let mut col = vec![0.0; n];
        for j in 0..n {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[j] = 1.0;
            cholesky_solve_in_place(&l, &mut col);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        // Symmetrise to remove rounding asymmetry.
        for i in 0..n {
            for j in 0..i {
                let avg = 0.5 * (inv[(i, j)] + inv[(j, i)]);
                inv[(i, j)] = avg;
                inv[(j, i)] = avg;
            }
        }
        Ok(inv)
    }

    /// Solves `self x = b` for symmetric positive definite `self`.
    pub fn spd_solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.rows {
            return Err(LinalgError::DimensionMismatch { expected: self.rows, found: b.len() });
        }
        let l = self.cholesky()?;
        let mut x = b.to_vec();
        cholesky_solve_in_place(&l, &mut x);
        Ok(x)
    }

    /// Copies `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_submatrix(&mut self, r0: usize, c0: usize, block: &DenseMat) {
        for i in 0..block.rows {
            let dst = (r0 + i) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(i));
        }
    }

    /// Adds `alpha * block` into `self` at `(r0, c0)`.
    pub fn add_submatrix(&mut self, r0: usize, c0: usize, alpha: f64, block: &DenseMat) {
        for i in 0..block.rows {
            let dst = (r0 + i) * self.cols + c0;
            for (d, s) in self.data[dst..dst + block.cols].iter_mut().zip(block.row(i)) {
                *d += alpha * s;
            }
        }
    }

    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMat {
        DenseMat::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }
}

impl Index<(usize, usize)> for DenseMat {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Textbook (Cholesky–Banachiewicz) factorisation of a symmetric positive
/// definite matrix. A pivot at or below `1e-14 * max diagonal` is rejected.
pub fn dense_cholesky(m: &DenseMat) -> Result<DenseMat, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare { rows: m.rows, cols: m.cols });
    }
    let n = m.rows;
    let max_diag = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max);
    let threshold = PIVOT_TOLERANCE * max_diag;
    let mut l = DenseMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = m[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            if i == j {
                if !(s > threshold) {
                    return Err(LinalgError::NotPositiveDefinite { pivot: i, value: s });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// In place `x <- L⁻¹ x` for lower-triangular `L`.
pub fn forward_substitute(l: &DenseMat, x: &mut [f64]) {
    for i in 0..l.rows {
        let s = x[i] - dot(&l.row(i)[..i], &x[..i]);
        x[i] = s / l[(i, i)];
    }
}

/// In place `x <- L⁻ᵀ x` for lower-triangular `L`.
pub fn backward_substitute_transposed(l: &DenseMat, x: &mut [f64]) {
    let n = l.rows;
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        for k in 0..i {
            x[k] -= l[(i, k)] * xi;
        }
    }
}

/// Solves `L Lᵀ x = b` in place.
pub fn cholesky_solve_in_place(l: &DenseMat, x: &mut [f64]) {
    forward_substitute(l, x);
    backward_substitute_transposed(l, x);
}

/// Returns `X` with `X Lᵀ = B`, i.e. `X = B L⁻ᵀ`, for lower-triangular `L`.
pub fn right_solve_lower_transposed(b: &DenseMat, l: &DenseMat) -> DenseMat {
    // Row i of X solves L xᵢ = bᵢ.
    let mut x = b.clone();
    for i in 0..x.rows {
        let cols = x.cols;
        forward_substitute(l, &mut x.data[i * cols..(i + 1) * cols]);
    }
    x
}
