//! Small dense symmetric linear algebra.
//!
//! Sizes here are the state dimension `d` (at most 8), so everything is
//! plain row-major `Vec<f64>` storage and the eigensolver is cyclic Jacobi.

pub mod blocktri;
pub mod dense;

use crate::error::{Error, Result};

/// Default relative rank cutoff for [`pinv`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Symmetric `d × d` matrix, row-major. Construction symmetrizes.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(d: usize) -> Self {
        Self {
            d,
            entries: vec![0.0; d * d],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..d {
            m.entries[i * d + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut m = Self::zeros(d);
        for (i, v) in diag.iter().enumerate() {
            m.entries[i * d + i] = *v;
        }
        m
    }

    /// Builds `½(M + Mᵀ)` from row-major entries.
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::invalid(format!(
                "matrix has {} entries, expected {d}×{d}",
                entries.len()
            )));
        }
        let mut m = Self { d, entries };
        m.symmetrize();
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("matrix rows must all have length d"));
        }
        Self::new(d, rows.iter().flatten().copied().collect())
    }

    fn symmetrize(&mut self) {
        let d = self.d;
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = 0.5 * (self.entries[i * d + j] + self.entries[j * d + i]);
                self.entries[i * d + j] = avg;
                self.entries[j * d + i] = avg;
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.d + j] = v;
        self.entries[j * self.d + i] = v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.d).map(|r| r.to_vec()).collect()
    }

    /// `self += alpha * other`
    pub fn add_scaled(&mut self, alpha: f64, other: &SymMatrix) {
        debug_assert_eq!(self.d, other.d);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += alpha * b;
        }
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.d {
            self.entries[i * self.d + i] += shift;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, row) in self.entries.chunks_exact(self.d).enumerate() {
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `xᵀ M x`
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.entries
            .chunks_exact(self.d)
            .zip(x)
            .map(|(row, xi)| xi * row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }
}

/// Eigenvalues ascending with matching orthonormal eigenvector columns.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomp {
    pub eigenvalues: Vec<f64>,
    /// Row-major `d × d`; column `j` is the eigenvector of `eigenvalues[j]`.
    pub eigenvectors: Vec<f64>,
}

impl EigenDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, j: usize) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| self.eigenvectors[i * d + j]).collect()
    }

    /// `Q f(Λ) Qᵀ`
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let d = self.dim();
        let mut out = SymMatrix::zeros(d);
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(lam);
            if w == 0.0 {
                continue;
            }
            for r in 0..d {
                let qr = self.eigenvectors[r * d + j] * w;
                for c in 0..d {
                    out.entries[r * d + c] += qr * self.eigenvectors[c * d + j];
                }
            }
        }
        out.symmetrize();
        out
    }
}

/// Cyclic Jacobi eigensolver.
pub fn eigh(m: &SymMatrix) -> Result<EigenDecomp> {
    if !m.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let d = m.dim();
    let mut a = m.entries.clone();
    let mut v = SymMatrix::identity(d).entries;

    let total: f64 = a.iter().map(|x| x * x).sum();
    for _sweep in 0..64 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p * d + q] * a[p * d + q];
            }
        }
        if off == 0.0 || off <= (f64::EPSILON * f64::EPSILON) * total * 1e-4 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.is_infinite() {
                    0.0
                } else {
                    theta.signum() / (theta.abs() + theta.hypot(1.0))
                };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                if t == 0.0 {
                    continue;
                }
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[i * d + i].total_cmp(&a[j * d + j]));
    let eigenvalues = order.iter().map(|&i| a[i * d + i]).collect();
    let mut eigenvectors = vec![0.0; d * d];
    for (new_j, &old_j) in order.iter().enumerate() {
        for r in 0..d {
            eigenvectors[r * d + new_j] = v[r * d + old_j];
        }
    }
    Ok(EigenDecomp {
        eigenvalues,
        eigenvectors,
    })
}

/// Moore–Penrose pseudoinverse; eigenvalues with `|λ| ≤ rank_tol · max|λ|`
/// contribute nothing.
pub fn pinv(m: &SymMatrix, rank_tol: f64) -> Result<SymMatrix> {
    Ok(pinv_with_rank(m, rank_tol)?.0)
}

/// Pseudoinverse plus a flag telling whether any eigenvalue was truncated.
pub fn pinv_with_rank(m: &SymMatrix, rank_tol: f64) -> Result<(SymMatrix, bool)> {
    if rank_tol <= 0.0 || !rank_tol.is_finite() {
        return Err(Error::invalid("rank_tol must be positive"));
    }
    let eig = eigh(m)?;
    let scale = eig.eigenvalues.iter().fold(0.0f64, |s, l| s.max(l.abs()));
    let cutoff = rank_tol * scale;
    let truncated = scale == 0.0 || eig.eigenvalues.iter().any(|l| l.abs() <= cutoff);
    let inv = eig.reconstruct_with(|l| {
        if scale == 0.0 || l.abs() <= cutoff {
            0.0
        } else {
            1.0 / l
        }
    });
    Ok((inv, truncated))
}

pub fn min_eig(m: &SymMatrix) -> Result<f64> {
    Ok(eigh(m)?.eigenvalues.first().copied().unwrap_or(0.0))
}

pub fn max_eig(m: &SymMatrix) -> Result<f64> {
    Ok(eigh(m)?.eigenvalues.last().copied().unwrap_or(0.0))
}
