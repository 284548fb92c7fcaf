//! Dense row-major matrix with validated construction.
//!
//! Every constructor rejects empty shapes and non-finite entries, so the
//! numeric code in the rest of the crate can assume finite data.

use ndarray::Array2;

use crate::error::{MmcError, Result};

/// Dense matrix of `f64` in standard (row-major) layout.
///
/// Invariants: `rows >= 1`, `cols >= 1`, every entry finite.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    inner: Array2<f64>,
}

impl DenseMatrix {
    /// Wraps an existing array, validating shape and finiteness.
    pub fn from_array(inner: Array2<f64>) -> Result<Self> {
        let (rows, cols) = inner.dim();
        if rows == 0 || cols == 0 {
            return Err(MmcError::invalid(format!(
                "matrix shape {rows}x{cols} must have at least one row and one column"
            )));
        }
        if let Some(bad) = inner.iter().find(|v| !v.is_finite()) {
            return Err(MmcError::invalid(format!(
                "matrix contains non-finite entry {bad}"
            )));
        }
        let inner = if inner.is_standard_layout() {
            inner
        } else {
            inner.as_standard_layout().into_owned()
        };
        Ok(DenseMatrix { inner })
    }

    /// Builds from a row-major buffer of length `rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(MmcError::invalid(format!(
                "buffer length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        let inner = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| MmcError::invalid(e.to_string()))?;
        Self::from_array(inner)
    }

    /// All-zeros matrix.
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(MmcError::invalid(format!(
                "matrix shape {rows}x{cols} must have at least one row and one column"
            )));
        }
        Ok(DenseMatrix {
            inner: Array2::zeros((rows, cols)),
        })
    }

    /// Builds entrywise from a function of `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(MmcError::invalid(format!(
              "matrix shape {rows}x{cols} must have at least one row and one column"
            )));
        }
        Self::from_array(Array2::from_shape_fn((rows, cols), |(i, j)| f(i, j)))
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.inner[(i, j)] = v;
    }

    /// Read access to the backing array.
    pub fn array(&self) -> &Array2<f64> {
        &self.inner
    }

    /// Mutable access to the backing array. Callers must keep entries finite.
    pub fn array_mut(&mut self) -> &mut Array2<f64> {
        &mut self.inner
    }

    pub fn into_array(self) -> Array2<f64> {
        self.inner
    }

    /// Entrywise map; the result is re-validated.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_array(self.inner.mapv(&f))
    }

    /// Row-major copy of the entries.
    pub fn to_vec(&self) -> Vec<f64> {
        self.inner.iter().copied().collect()
    }
}
