//! Minimal dense vector/matrix helpers. Everything here is row-major and
//! allocation-light; sizes in this crate top out at 512x512.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

/// Arithmetic mean of equal-length vectors; `None` for an empty list.
pub fn mean_of<T: Scalar, V: AsRef<[T]>>(vectors: &[V]) -> Option<Vec<T>> {
    let first = vectors.first()?.as_ref();
    let mut acc = vec![T::zero(); first.len()];
    for v in vectors {
        axpy(T::one(), v.as_ref(), &mut acc);
    }
    let n = T::from_usize(vectors.len()).unwrap();
    acc.iter_mut().for_each(|a| *a = *a / n);
    Some(acc)
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    /// `self * x + bias`
    pub fn affine(&self, x: &[T], bias: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(bias.len(), self.rows);
        self.data
            .chunks_exact(self.cols)
            .zip(bias)
            .map(|(row, &b)| dot(row, x) + b)
            .collect()
    }

    /// `selfᵀ * y`
    pub fn transpose_mul(&self, y: &[T]) -> Vec<T> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr != T::zero() {
                axpy(yr, self.row(r), &mut out);
            }
        }
        out
    }

    /// `self += alpha * u vᵀ`
    pub fn add_outer(&mut self, alpha: T, u: &[T], v: &[T]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        let cols = self.cols;
        for (r, &ur) in u.iter().enumerate() {
            let a = alpha * ur;
            if a != T::zero() {
                axpy(a, v, &mut self.data[r * cols..(r + 1) * cols]);
            }
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}
