//! Row-major `d × d` helpers for general (non-symmetric) blocks.

/// `C = A B`
pub fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

/// `C = Aᵀ B`
pub fn matmul_tn(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for k in 0..d {
        for i in 0..d {
            let aki = a[k * d + i];
            if aki == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aki * b[k * d + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[j * d + i] = a[i * d + j];
        }
    }
    out
}

/// `y = A x`
pub fn matvec(a: &[f64], x: &[f64], d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| (0..d).map(|j| a[i * d + j] * x[j]).sum())
        .collect()
}

/// `y = Aᵀ x`
pub fn matvec_t(a: &[f64], x: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for i in 0..d {
        for j in 0..d {
            out[j] += a[i * d + j] * x[i];
        }
    }
    out
}

/// In-place lower Cholesky factor; returns `None` if the matrix is not
/// numerically positive definite.
pub fn cholesky(a: &mut [f64], d: usize) -> Option<()> {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        a[j * d + j] = ljj;
        for i in (j + 1)..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / ljj;
        }
        for i in 0..j {
            a[i * d + j] = 0.0;
        }
    }
    Some(())
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky`], in place.
pub fn cholesky_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut v = b[i];
        for k in 0..i {
            v -= l[i * d + k] * b[k];
        }
        b[i] = v / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut v = b[i];
        for k in (i + 1)..d {
            v -= l[k * d + i] * b[k];
        }
        b[i] = v / l[i * d + i];
    }
}

pub fn solve_spd(a: &[f64], d: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut l = a.to_vec();
    cholesky(&mut l, d)?;
    let mut x = b.to_vec();
    cholesky_solve(&l, d, &mut x);
    Some(x)
}

/// Gaussian elimination with partial pivoting. `None` when singular.
pub fn solve_lu(a: &[f64], d: usize, b: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..d {
        let piv = (col..d).max_by(|&i, &j| m[i * d + col].abs().total_cmp(&m[j * d + col].abs()))?;
        if m[piv * d + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for j in 0..d {
                m.swap(col * d + j, piv * d + j);
            }
            x.swap(col, piv);
        }
        for i in (col + 1)..d {
            let f = m[i * d + col] / m[col * d + col];
            if f == 0.0 {
                continue;
            }
            for j in col..d {
                m[i * d + j] -= f * m[col * d + j];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..d).rev() {
        let mut v = x[i];
        for j in (i + 1)..d {
            v -= m[i * d + j] * x[j];
        }
        x[i] = v / m[i * d + i];
    }
    Some(x)
}
