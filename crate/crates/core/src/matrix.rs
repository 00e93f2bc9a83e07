//! Dense column-major storage. Columns are features, so every per-feature
//! update works on a contiguous slice.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SccError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColMatrix<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T: Scalar> ColMatrix<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, data: vec![T::zero(); nrows * ncols] }
    }

    /// Wraps column-major data of length `nrows * ncols`.
    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(SccError::ShapeMismatch {
                expected: format!("{} values", nrows * ncols),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Self { nrows, ncols, data })
    }

    /// Builds a matrix from row vectors; every row must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(SccError::ShapeMismatch {
                    expected: format!("row of length {ncols}"),
                    found: format!("row {i} of length {}", r.len()),
                });
            }
            for (j, &v) in r.iter().enumerate() {
                m.data[j * nrows + i] = v;
            }
        }
        Ok(m)
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for i in 0..nrows {
                data.push(f(i, j));
            }
        }
        Self { nrows, ncols, data }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.nrows, self.ncols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[j * self.nrows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[j * self.nrows + i] = v;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        let n = self.nrows;
        &mut self.data[j * n..(j + 1) * n]
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        (0..self.nrows).map(|i| self.row(i)).collect()
    }

    /// Column-major backing slice, i.e. `vec(A)`.
    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn frobenius_norm(&self) -> T {
        crate::scalar::norm2(&self.data)
    }

    /// Frobenius norm of `self - other`.
    pub fn distance(&self, other: &Self) -> T {
        crate::scalar::sq_dist(&self.data, &other.data).sqrt()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { nrows: self.nrows, ncols: self.ncols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    /// Selects rows by index (duplicates allowed), preserving order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), self.ncols, |i, j| self.get(idx[i], j))
    }

    /// Selects columns by index, preserving order.
    pub fn select_cols(&self, idx: &[usize]) -> Self {
        Self::from_fn(self.nrows, idx.len(), |i, j| self.get(i, idx[j]))
    }

    pub fn column_means(&self) -> Vec<T> {
        let n = T::from_usize_lossy(self.nrows.max(1));
        (0..self.ncols).map(|j| self.col(j).iter().copied().sum::<T>() / n).collect()
    }

    /// Converts element type through `f64`.
    pub fn cast<U: Scalar>(&self) -> ColMatrix<U> {
        ColMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}
