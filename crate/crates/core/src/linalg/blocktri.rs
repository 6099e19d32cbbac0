//! Symmetric block-tridiagonal systems, the shape of the Gauss–Newton
//! normal equations for a block-bidiagonal Jacobian.

use super::dense;

/// Symmetric block-tridiagonal matrix with `n` diagonal blocks of size `d`.
/// `sub[k]` is the block at position `(k, k-1)`; `sub[0]` is unused.
#[derive(Clone, Debug)]
pub struct BlockTridiag {
    pub d: usize,
    pub n: usize,
    pub diag: Vec<f64>,
    pub sub: Vec<f64>,
}

impl BlockTridiag {
    pub fn zeros(d: usize, n: usize) -> Self {
        Self {
            d,
            n,
            diag: vec![0.0; n * d * d],
            sub: vec![0.0; n * d * d],
        }
    }

    pub fn diag_block(&self, k: usize) -> &[f64] {
        let s = self.d * self.d;
        &self.diag[k * s..(k + 1) * s]
    }

    pub fn diag_block_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.d * self.d;
        &mut self.diag[k * s..(k + 1) * s]
    }

    pub fn sub_block(&self, k: usize) -> &[f64] {
        let s = self.d * self.d;
        &self.sub[k * s..(k + 1) * s]
    }

    pub fn sub_block_mut(&mut self, k: usize) -> &mut [f64] {
        let s = self.d * self.d;
        &mut self.sub[k * s..(k + 1) * s]
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        let d = self.d;
        for k in 0..self.n {
            let b = self.diag_block_mut(k);
            for i in 0..d {
                b[i * d + i] += shift;
            }
        }
    }

    pub fn max_diagonal(&self) -> f64 {
        let d = self.d;
        (0..self.n)
            .flat_map(|k| (0..d).map(move |i| (k, i)))
            .map(|(k, i)| self.diag_block(k)[i * d + i])
            .fold(0.0, f64::max)
    }

    /// `y = M x` for a flat vector of `n·d` entries.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut y = vec![0.0; self.n * d];
        for k in 0..self.n {
            let yk = dense::matvec(self.diag_block(k), &x[k * d..(k + 1) * d], d);
            for i in 0..d {
                y[k * d + i] += yk[i];
            }
            if k > 0 {
                let c = self.sub_block(k);
                let lo = dense::matvec(c, &x[(k - 1) * d..k * d], d);
                let up = dense::matvec_t(c, &x[k * d..(k + 1) * d], d);
                for i in 0..d {
                    y[k * d + i] += lo[i];
                    y[(k - 1) * d + i] += up[i];
                }
            }
        }
        y
    }

    /// Block Cholesky factorization; `None` if not positive definite.
    pub fn factor(&self) -> Option<BlockCholesky> {
        let d = self.d;
        let s = d * d;
        let mut diag = vec![0.0; self.n * s];
        let mut sub = vec![0.0; self.n * s];
        for k in 0..self.n {
            let mut a = self.diag_block(k).to_vec();
            if k > 0 {
                // L_{k,k-1} = C_k L_{k-1}^{-T}: solve row by row against L_{k-1}
                let lprev = &diag[(k - 1) * s..k * s];
                let c = self.sub_block(k);
                let mut lk = vec![0.0; s];
                for r in 0..d {
                    for j in 0..d {
                        let mut v = c[r * d + j];
                        for m in 0..j {
                            v -= lk[r * d + m] * lprev[j * d + m];
                        }
                        lk[r * d + j] = v / lprev[j * d + j];
                    }
                }
                for i in 0..d {
                    for j in 0..d {
                        let mut v = 0.0;
                        for m in 0..d {
                            v += lk[i * d + m] * lk[j * d + m];
                        }
                        a[i * d + j] -= v;
                    }
                }
                sub[k * s..(k + 1) * s].copy_from_slice(&lk);
            }
            dense::cholesky(&mut a, d)?;
            diag[k * s..(k + 1) * s].copy_from_slice(&a);
        }
        Some(BlockCholesky {
            d,
            n: self.n,
            diag,
            sub,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BlockCholesky {
    d: usize,
    n: usize,
    diag: Vec<f64>,
    sub: Vec<f64>,
}

impl BlockCholesky {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.d;
        let s = d * d;
        let mut x = b.to_vec();
        // forward: L y = b
        for k in 0..self.n {
            if k > 0 {
                let lk = &self.sub[k * s..(k + 1) * s];
                let (head, tail) = x.split_at_mut(k * d);
                let prev = &head[(k - 1) * d..];
                for i in 0..d {
                    tail[i] -= (0..d).map(|j| lk[i * d + j] * prev[j]).sum::<f64>();
                }
            }
            let l = &self.diag[k * s..(k + 1) * s];
            let xk = &mut x[k * d..(k + 1) * d];
            for i in 0..d {
                let mut v = xk[i];
                for j in 0..i {
                    v -= l[i * d + j] * xk[j];
                }
                xk[i] = v / l[i * d + i];
            }
        }
        // backward: Lᵀ x = y
        for k in (0..self.n).rev() {
            if k + 1 < self.n {
                let lk1 = &self.sub[(k + 1) * s..(k + 2) * s];
                let (head, tail) = x.split_at_mut((k + 1) * d);
                let next = &tail[..d];
                let xk = &mut head[k * d..];
                for j in 0..d {
                    xk[j] -= (0..d).map(|i| lk1[i * d + j] * next[i]).sum::<f64>();
                }
            }
            let l = &self.diag[k * s..(k + 1) * s];
            let xk = &mut x[k * d..(k + 1) * d];
            for i in (0..d).rev() {
                let mut v = xk[i];
                for j in (i + 1)..d {
                    v -= l[j * d + i] * xk[j];
                }
                xk[i] = v / l[i * d + i];
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_spd_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(d, n) in &[(1usize, 7usize), (2, 5), (3, 40)] {
            // M = JᵀJ + I with J lower block-bidiagonal
            let mut m = BlockTridiag::zeros(d, n);
            let diag_j: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let sub_j: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            for k in 0..n {
                let mut blk = dense::matmul_tn(&diag_j[k], &diag_j[k], d);
                if k + 1 < n {
                    let extra = dense::matmul_tn(&sub_j[k + 1], &sub_j[k + 1], d);
                    for (a, b) in blk.iter_mut().zip(extra) {
                        *a += b;
                    }
                }
                m.diag_block_mut(k).copy_from_slice(&blk);
                if k > 0 {
                    let c = dense::matmul_tn(&diag_j[k], &sub_j[k], d);
                    m.sub_block_mut(k).copy_from_slice(&c);
                }
            }
            m.add_diagonal(1.0);
            let x: Vec<f64> = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let b = m.apply(&x);
            let sol = m.factor().expect("spd").solve(&b);
            for (a, e) in sol.iter().zip(&x) {
                assert!((a - e).abs() < 1e-9, "{a} vs {e}");
            }
        }
    }

    #[test]
    fn indefinite_fails_to_factor() {
        let mut m = BlockTridiag::zeros(1, 2);
        m.diag = vec![1.0, 1.0];
        m.sub = vec![0.0, 2.0];
        assert!(m.factor().is_none());
    }
}
