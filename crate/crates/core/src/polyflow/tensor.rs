use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64, ZERO};

/// A sparse coefficient tensor of degree `k` acting on `x^{⊗k}`.
///
/// Entries are keyed by `(row, j₁..j_k)` and kept in lexicographic order.
/// Inserting an existing key adds to the stored value; entries that sum to
/// exactly zero are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    degree: usize,
    dim: usize,
    entries: BTreeMap<(usize, Vec<usize>), C64>,
}

impl SparseTensor {
    pub fn new(dim: usize, degree: usize) -> Self {
        Self { degree, dim, entries: BTreeMap::new() }
    }

    pub fn from_entries<I>(dim: usize, degree: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, Vec<usize>, C64)>,
    {
        let mut t = Self::new(dim, degree);
        for (i, cols, v) in entries {
            t.insert(i, &cols, v)?;
        }
        Ok(t)
    }

    /// Adds `value` at `(row, cols)`.
    pub fn insert(&mut self, row: usize, cols: &[usize], value: C64) -> Result<()> {
        if cols.len() != self.degree {
            return Err(Error::DimensionMismatch { expected: self.degree, got: cols.len() });
        }
        if row >= self.dim {
            return Err(Error::OutOfRange { index: row, len: self.dim });
        }
        if let Some(&bad) = cols.iter().find(|&&j| j >= self.dim) {
            return Err(Error::OutOfRange { index: bad, len: self.dim });
        }
        let key = (row, cols.to_vec());
        let slot = self.entries.entry(key).or_insert(ZERO);
        *slot += value;
        if *slot == ZERO {
            self.entries.remove(&(row, cols.to_vec()));
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, row: usize, cols: &[usize]) -> C64 {
        self.entries.get(&(row, cols.to_vec())).copied().unwrap_or(ZERO)
    }

    /// Entries in lexicographic `(row, cols)` order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[usize], C64)> + '_ {
        self.entries.iter().map(|((i, cols), v)| (*i, cols.as_slice(), *v))
    }

    pub fn scaled(&self, s: C64) -> Self {
        let mut out = Self::new(self.dim, self.degree);
        for (i, cols, v) in self.iter() {
            // scaling by zero clears the tensor
            let _ = out.insert(i, cols, v * s);
        }
        out
    }

    /// Flat column index of a multi-index, `j₁` most significant.
    pub fn flat_col(&self, cols: &[usize]) -> usize {
        cols.iter().fold(0, |acc, &j| acc * self.dim + j)
    }

    /// The `d × d^k` flattening.
    pub fn flatten(&self) -> CMat {
        let ncols = self.dim.pow(self.degree as u32);
        let mut m = CMat::zeros(self.dim, ncols);
        for (i, cols, v) in self.iter() {
            m[(i, self.flat_col(cols))] += v;
        }
        m
    }

    /// Spectral norm of the `d × d^k` flattening; the norm used in every R-number.
    pub fn spectral_norm(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        crate::linalg::spectral_norm(&self.flatten())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}
