//! Dense `d × n` real fields stored column by column.
//!
//! Every per-node quantity in the crate (trajectories, residuals, dual
//! variables) is one of these: column `k` holds the `d` components at grid
//! node `k + 1`.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Columns {
    dim: usize,
    len: usize,
    data: Vec<f64>,
}

impl Columns {
    pub fn zeros(dim: usize, len: usize) -> Self {
        Self {
            dim,
            len,
            data: vec![0.0; dim * len],
        }
    }

    pub fn from_vec(dim: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * len {
            return Err(Error::invalid(format!(
                "field data has {} entries, expected {dim}×{len}",
                data.len()
            )));
        }
        Ok(Self { dim, len, data })
    }

    /// Builds a field from a closure evaluated at `(component, column)`.
    pub fn from_fn(dim: usize, len: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * len);
        for k in 0..len {
            for i in 0..dim {
                data.push(f(i, k));
            }
        }
        Self { dim, len, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of columns.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn col(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn col_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.dim..(k + 1) * self.dim]
    }

    #[inline]
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.data[k * self.dim + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, k: usize, v: f64) {
        self.data[k * self.dim + i] = v;
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

    pub fn iter_cols(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1)).take(self.len)
    }

    /// Sum of squares, accumulated left to right.
    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Frobenius inner product `tr(selfᵀ other)`.
    pub fn dot(&self, other: &Columns) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn scaled(&self, s: f64) -> Columns {
        Columns {
            dim: self.dim,
            len: self.len,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &Columns) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn same_shape(&self, other: &Columns) -> bool {
        self.dim == other.dim && self.len == other.len
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
