//! Dense row-major matrices and the small set of kernels the model needs.
//!
//! Every kernel uses a fixed, documented reduction order so results are
//! reproducible bit-for-bit across runs, call sites, and thread counts.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    /// All-zeros matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    /// Build from row-major data; fails if `data.len() != rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "Matrix::from_vec",
                detail: format!("{}x{} needs {} values, got {}", rows, cols, rows * cols, data.len()),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Build an `n x 3` matrix from 3-component rows.
    pub fn from_rows3(rows: &[[S; 3]]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * 3);
        for r in rows {
            data.extend_from_slice(r);
        }
        Matrix {
            rows: rows.len(),
            cols: 3,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[S] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [S] {
        &mut self.data
    }
    pub fn into_data(self) -> Vec<S> {
        self.data
    }

    /// Borrow row `r`.
    #[inline]
    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Mutably borrow row `r`.
    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    /// True if every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Convert entries through `f64` into another scalar type.
    pub fn cast<T: Scalar>(&self) -> Matrix<T> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| T::from_f64(v.to_f64())).collect(),
        }
    }
}

/// Dot product with a fixed four-accumulator reduction order.
///
/// The four lanes accumulate strided quarters of the input and are then
/// combined as `((l0 + l1) + (l2 + l3)) + tail`. The expression tree is
/// fixed, so the result is deterministic; and because scaling every term
/// by a power of two commutes with IEEE rounding at each node, scaling
/// one argument by `2^k` scales the result exactly.
#[inline]
pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let mut l0 = S::zero();
    let mut l1 = S::zero();
    let mut l2 = S::zero();
    let mut l3 = S::zero();
    for i in 0..chunks {
        let j = i * 4;
        l0 = l0 + a[j] * b[j];
        l1 = l1 + a[j + 1] * b[j + 1];
        l2 = l2 + a[j + 2] * b[j + 2];
        l3 = l3 + a[j + 3] * b[j + 3];
    }
    let mut tail = S::zero();
    for j in chunks * 4..n {
        tail = tail + a[j] * b[j];
    }
    ((l0 + l1) + (l2 + l3)) + tail
}

/// `w · x` for `w: r x c`, `x: len c`.
pub fn matvec<S: Scalar>(w: &Matrix<S>, x: &[S]) -> Result<Vec<S>> {
    if w.cols() != x.len() {
        return Err(Error::Shape {
            op: "matvec",
            detail: format!("matrix is {}x{}, vector has length {}", w.rows(), w.cols(), x.len()),
        });
    }
    Ok((0..w.rows()).map(|r| dot(w.row(r), x)).collect())
}

/// `a · bᵀ` for `a: m x k`, `b: n x k`, giving `m x n`.
///
/// Row-major with the second operand transposed keeps every inner product
/// over contiguous slices, which is both fast and order-deterministic.
pub fn matmul_nt<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
    if a.cols() != b.cols() {
        return Err(Error::Shape {
            op: "matmul_nt",
            detail: format!(
                "inner dimensions differ: {}x{} vs ({}x{})ᵀ",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            ),
        });
    }
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let ar = a.row(i);
        let or = out.row_mut(i);
        for (j, o) in or.iter_mut().enumerate() {
            *o = dot(ar, b.row(j));
        }
    }
    Ok(out)
}

/// Scaled affine map `(w · x) ∘ s + b`: matrix-vector product, elementwise
/// scale, then bias.
///
/// With `s` all ones this is bit-identical to the plain affine map
/// `w · x + b`, because multiplying by exactly `1.0` is the identity in
/// IEEE arithmetic.
pub fn scaled_affine_forward<S: Scalar>(
    w: &Matrix<S>,
    s: &[S],
    b: &[S],
    x: &[S],
) -> Result<Vec<S>> {
    if s.len() != w.rows() || b.len() != w.rows() {
        return Err(Error::Shape {
            op: "scaled_affine_forward",
            detail: format!(
                "matrix is {}x{}, scale has length {}, bias has length {}",
                w.rows(),
                w.cols(),
                s.len(),
                b.len()
            ),
        });
    }
    let mut y = matvec(w, x)?;
    for i in 0..y.len() {
        y[i] = y[i] * s[i] + b[i];
    }
    Ok(y)
}

/// Plain affine map `w · x + b`.
pub fn affine_forward<S: Scalar>(w: &Matrix<S>, b: &[S], x: &[S]) -> Result<Vec<S>> {
    if b.len() != w.rows() {
        return Err(Error::Shape {
            op: "affine_forward",
            detail: format!("matrix is {}x{}, bias has length {}", w.rows(), w.cols(), b.len()),
        });
    }
    let mut y = matvec(w, x)?;
    for i in 0..y.len() {
        y[i] = y[i] + b[i];
    }
    Ok(y)
}

/// Elementwise rectifier `max(x, 0)`; `relu(0) = 0`.
pub fn relu<S: Scalar>(x: &[S]) -> Vec<S> {
    x.iter()
        .map(|&v| if v > S::zero() { v } else { S::zero() })
        .collect()
}

/// Column-wise max over an `n x d` matrix, returning the `d` maxima and
/// the row index attaining each (lowest row on ties).
///
/// Fails on an empty matrix: the max of zero rows is undefined.
pub fn maxpool_columns<S: Scalar>(m: &Matrix<S>) -> Result<(Vec<S>, Vec<usize>)> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptyCloud("maxpool_columns"));
    }
    let mut vals: Vec<S> = m.row(0).to_vec();
    let mut arg: Vec<usize> = vec![0; m.cols()];
    for r in 1..m.rows() {
        let row = m.row(r);
        for c in 0..m.cols() {
            // Strictly-greater keeps the lowest row index on ties.
            if row[c] > vals[c] {
                vals[c] = row[c];
                arg[c] = r;
            }
        }
    }
    Ok((vals, arg))
}

/// Dot product of `a` and `b` upcast to `f64` and accumulated in
/// double-double, returned unrounded.
pub fn dot_dd<S: Scalar>(a: &[S], b: &[S]) -> (f64, f64) {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = (0.0, 0.0);
    for (&x, &y) in a.iter().zip(b.iter()) {
        acc = crate::scalar::dd::add(acc, crate::scalar::dd::two_prod(x.to_f64(), y.to_f64()));
    }
    acc
}
