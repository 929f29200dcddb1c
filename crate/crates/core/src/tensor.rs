//! Dense row-major matrices holding Q, K, V, or output rows.

use std::fmt::{Debug, Display};

use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

/// Floating-point element type used by the simulator (`f32` or `f64`).
pub trait Scalar: Float + Debug + Display + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    fn of(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn of(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// An `rows x cols` matrix; row `i` is token position `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceTensor<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> SequenceTensor<T> {
    /// Builds a tensor from row-major data, rejecting empty shapes and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::EmptySequence);
        }
        if cols == 0 {
            return Err(Error::DimensionMismatch("tensor must have at least one column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} elements supplied for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: pos / cols, col: pos % cols });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![T::zero(); rows * cols])
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("rows have differing lengths".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Entries drawn uniformly from `[-1, 1)`. Sampling happens in `f64`, so
    /// the same generator state yields the same values for either precision
    /// up to rounding.
    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Result<Self> {
        Self::from_fn(rows, cols, |_, _| T::of(rng.gen_range(-1.0..1.0)))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn view(&self) -> RowsView<'_, T> {
        RowsView { data: &self.data, rows: self.rows, cols: self.cols }
    }

    /// Borrows rows `start..start + len`.
    pub fn rows_view(&self, start: usize, len: usize) -> Result<RowsView<'_, T>> {
        if start + len > self.rows {
            return Err(Error::IndexOutOfRange { what: "row", index: start + len - 1, bound: self.rows });
        }
        Ok(RowsView { data: &self.data[start * self.cols..(start + len) * self.cols], rows: len, cols: self.cols })
    }

    /// Copies rows in the order given by `indices`.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange { what: "row", index: i, bound: self.rows });
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.cols, data)
    }

    pub fn cast<U: Scalar>(&self) -> SequenceTensor<U> {
        SequenceTensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::of(x.as_f64())).collect(),
        }
    }

    /// Largest absolute elementwise difference, computed in `f64`.
    pub fn max_abs_diff<U: Scalar>(&self, other: &SequenceTensor<U>) -> Result<f64> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| (a.as_f64() - b.as_f64()).abs()).fold(0.0, f64::max))
    }
}

/// Borrowed contiguous run of rows.
#[derive(Clone, Copy, Debug)]
pub struct RowsView<'a, T> {
    data: &'a [T],
    rows: usize,
    cols: usize,
}

impl<'a, T: Scalar> RowsView<'a, T> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, row: usize) -> &'a [T] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
