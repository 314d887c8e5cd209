//! Row-oriented dense and sparse matrices.
//!
//! Clustering and regression only ever touch a matrix one row at a time, so
//! both layouts are consumed through [`RowMatrix`].

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Read access to a matrix by rows.
pub trait RowMatrix<T: Scalar>: Sync {
    fn n_rows(&self) -> usize;
    fn n_cols(&self) -> usize;

    /// Dot product of row `i` with a dense vector of length `n_cols`.
    fn row_dot(&self, i: usize, v: &[T]) -> T;

    fn row_sq_norm(&self, i: usize) -> T;

    /// `out += alpha * row(i)`.
    fn add_row_scaled(&self, i: usize, alpha: T, out: &mut [T]);

    /// Squared Euclidean distance from row `i` to `c`, given `c_sq_norm = ‖c‖²`.
    ///
    /// The default uses the expansion `‖x‖² + ‖c‖² − 2x·c`, clamped at zero.
    fn sq_dist(&self, i: usize, c: &[T], c_sq_norm: T) -> T {
        let d = self.row_sq_norm(i) + c_sq_norm - T::of(2.0) * self.row_dot(i, c);
        d.max(T::zero())
    }

    fn row_dense(&self, i: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.n_cols()];
        self.add_row_scaled(i, T::one(), &mut out);
        out
    }

    /// New matrix made of the given rows, in the given order.
    fn select_rows(&self, rows: &[usize]) -> Self
    where
        Self: Sized;

    /// Copy with every non-empty row scaled to unit L2 norm.
    fn l2_normalized(&self) -> Self
    where
        Self: Sized;

    /// First non-finite entry as `(row, col)`, if any.
    fn find_non_finite(&self) -> Option<(usize, usize)>;
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Length {
                left: rows * cols,
                right: data.len(),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> DenseMatrix<U> {
        self.map(|v| U::of(v.as_f64()))
    }

    /// Scales every column to zero mean and unit variance using the given
    /// statistics; columns with zero spread are only centered.
    pub fn standardize_with(&mut self, mean: &[T], std: &[T]) {
        let cols = self.cols;
        for row in self.data.chunks_exact_mut(cols.max(1)) {
            for j in 0..cols {
                let s = if std[j] > T::zero() { std[j] } else { T::one() };
                row[j] = (row[j] - mean[j]) / s;
            }
        }
    }

    /// Per-column mean and population standard deviation.
    pub fn column_stats(&self) -> (Vec<T>, Vec<T>) {
        let n = T::of_usize(self.rows.max(1));
        let mut mean = vec![T::zero(); self.cols];
        for row in self.rows_iter() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); self.cols];
        for row in self.rows_iter() {
            for ((s, &v), &m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        (mean, var.into_iter().map(|s| (s / n).sqrt()).collect())
    }
}

impl<T: Scalar> RowMatrix<T> for DenseMatrix<T> {
    fn n_rows(&self) -> usize {
        self.rows
    }

    fn n_cols(&self) -> usize {
        self.cols
    }

    fn row_dot(&self, i: usize, v: &[T]) -> T {
        self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum()
    }

    fn row_sq_norm(&self, i: usize) -> T {
        self.row(i).iter().map(|&a| a * a).sum()
    }

    fn add_row_scaled(&self, i: usize, alpha: T, out: &mut [T]) {
        for (o, &a) in out.iter_mut().zip(self.row(i)) {
            *o += alpha * a;
        }
    }

    fn sq_dist(&self, i: usize, c: &[T], _c_sq_norm: T) -> T {
        self.row(i)
            .iter()
            .zip(c)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()
    }

    fn row_dense(&self, i: usize) -> Vec<T> {
        self.row(i).to_vec()
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        DenseMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
        }
    }

    fn l2_normalized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            let norm = self.row_sq_norm(i).sqrt();
            if norm > T::zero() {
                out.row_mut(i).iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }

    fn find_non_finite(&self) -> Option<(usize, usize)> {
        let cols = self.cols.max(1);
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|p| (p / cols, p % cols))
    }
}

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within a row and every stored value
/// is finite and non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Scalar> SparseMatrix<T> {
    /// Builds a matrix from per-row `(column, value)` lists. Entries are sorted,
    /// zeros are dropped, and duplicate columns are rejected.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, T)>>) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (r, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            let mut prev: Option<usize> = None;
            for (c, v) in row {
                if c >= cols {
                    return Err(Error::Dimension {
                        expected: cols,
                        found: c + 1,
                    });
                }
                if prev == Some(c) {
                    return Err(Error::Invalid(format!("duplicate column {c} in row {r}")));
                }
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: r, col: c });
                }
                prev = Some(c);
                if v != T::zero() {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(SparseMatrix {
            rows: indptr.len() - 1,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[i]..self.indptr[i + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DenseMatrix<T> {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let row = out.row_mut(i);
            for (c, v) in self.row_entries(i) {
                row[c] = v;
            }
        }
        out
    }
}

impl<T: Scalar> RowMatrix<T> for SparseMatrix<T> {
    fn n_rows(&self) -> usize {
        self.rows
    }

    fn n_cols(&self) -> usize {
        self.cols
    }

    fn row_dot(&self, i: usize, v: &[T]) -> T {
        self.row_entries(i).map(|(c, x)| x * v[c]).sum()
    }

    fn row_sq_norm(&self, i: usize) -> T {
        self.row_entries(i).map(|(_, x)| x * x).sum()
    }

    fn add_row_scaled(&self, i: usize, alpha: T, out: &mut [T]) {
        for (c, x) in self.row_entries(i) {
            out[c] += alpha * x;
        }
    }

    fn select_rows(&self, rows: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &r in rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            indices.extend_from_slice(&self.indices[span.clone()]);
            values.extend_from_slice(&self.values[span]);
            indptr.push(indices.len());
        }
        SparseMatrix {
            rows: rows.len(),
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    fn l2_normalized(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.rows {
            let norm = self.row_sq_norm(i).sqrt();
            if norm > T::zero() {
                out.values[self.indptr[i]..self.indptr[i + 1]]
                    .iter_mut()
                    .for_each(|v| *v /= norm);
            }
        }
        out
    }

    fn find_non_finite(&self) -> Option<(usize, usize)> {
        (0..self.rows).find_map(|i| {
            self.row_entries(i)
                .find(|(_, v)| !v.is_finite())
                .map(|(c, _)| (i, c))
        })
    }
}

pub(crate) fn sq_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().map(|&x| x * x).sum()
}
