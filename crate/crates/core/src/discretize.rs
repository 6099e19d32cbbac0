//! Trapezoidal discretization and the least-squares objective
//! `P(Y) = ½ Σₖ ‖Yₖ − Yₖ₋₁ − (δ/2)(Fₖ + Fₖ₋₁)‖²`.
//!
//! The initial state `Y₀` is fixed; the unknowns are the `n` columns
//! `Y₁ … Yₙ`. Because `rₖ` depends only on `Yₖ` and `Yₖ₋₁`, the Jacobian is
//! block lower-bidiagonal and its normal matrix block-tridiagonal.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::field::Columns;
use crate::linalg::blocktri::BlockTridiag;
use crate::linalg::dense;
use crate::model::IvpSpec;

/// Discrete trajectory: fixed `y0` plus columns `Y₁ … Yₙ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub y0: Vec<f64>,
    pub cols: Columns,
}

impl Trajectory {
    pub fn zeros(spec: &IvpSpec) -> Self {
        Self {
            y0: spec.y0.clone(),
            cols: Columns::zeros(spec.dim(), spec.steps),
        }
    }

    pub fn new(spec: &IvpSpec, cols: Columns) -> Result<Self> {
        let t = Self {
            y0: spec.y0.clone(),
            cols,
        };
        check(spec, &t)?;
        Ok(t)
    }

    /// Constant trajectory `Yₖ = y0` for all k.
    pub fn constant(spec: &IvpSpec) -> Self {
        let d = spec.dim();
        Self {
            y0: spec.y0.clone(),
            cols: Columns::from_fn(d, spec.steps, |i, _| spec.y0[i]),
        }
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    pub fn steps(&self) -> usize {
        self.cols.len()
    }

    /// State at node `k`, `k = 0` being the fixed initial state.
    #[inline]
    pub fn state(&self, k: usize) -> &[f64] {
        if k == 0 {
            &self.y0
        } else {
            self.cols.col(k - 1)
        }
    }
}

/// Residual columns `rₖ = Yₖ − Yₖ₋₁ − (δ/2)(Fₖ + Fₖ₋₁)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualField {
    pub r: Columns,
}

impl ResidualField {
    pub fn objective(&self) -> f64 {
        0.5 * self.r.norm_sq()
    }
}

pub(crate) fn check(spec: &IvpSpec, y: &Trajectory) -> Result<()> {
    if y.y0.len() != spec.dim() || y.cols.dim() != spec.dim() {
        return Err(Error::invalid(format!(
            "trajectory dimension {} does not match system dimension {}",
            y.cols.dim(),
            spec.dim()
        )));
    }
    if y.cols.len() != spec.steps {
        return Err(Error::invalid(format!(
            "trajectory has {} columns, grid has {} steps",
            y.cols.len(),
            spec.steps
        )));
    }
    Ok(())
}

/// `F(t_k, Y_k)` for `k = 0..=n`, flat.
fn field_values(spec: &IvpSpec, y: &Trajectory) -> Vec<f64> {
    let d = spec.dim();
    let grid = spec.grid();
    let mut out = vec![0.0; (spec.steps + 1) * d];
    for (k, f) in out.chunks_exact_mut(d).enumerate() {
        spec.system.eval_into(grid.node(k), y.state(k), f);
    }
    out
}

pub(crate) fn residuals_unchecked(spec: &IvpSpec, y: &Trajectory) -> Columns {
    let d = spec.dim();
    let half = 0.5 * spec.step();
    let f = field_values(spec, y);
    let mut r = Columns::zeros(d, spec.steps);
    for k in 1..=spec.steps {
        let cur = y.state(k);
        let prev = y.state(k - 1);
        let rk = r.col_mut(k - 1);
        for i in 0..d {
            rk[i] = cur[i] - prev[i] - half * (f[k * d + i] + f[(k - 1) * d + i]);
        }
    }
    r
}

pub fn residuals(spec: &IvpSpec, y: &Trajectory) -> Result<ResidualField> {
    check(spec, y)?;
    Ok(ResidualField {
        r: residuals_unchecked(spec, y),
    })
}

pub fn objective(spec: &IvpSpec, y: &Trajectory) -> Result<f64> {
    check(spec, y)?;
    Ok(0.5 * residuals_unchecked(spec, y).norm_sq())
}

/// `∇P = Jᵀ r`, computed analytically.
pub fn gradient(spec: &IvpSpec, y: &Trajectory) -> Result<Columns> {
    check(spec, y)?;
    let r = residuals_unchecked(spec, y);
    Ok(gn_jacobian_unchecked(spec, y).apply_transpose(&r))
}

/// Block lower-bidiagonal `∂r/∂Y`.
///
/// `diag[k] = I − (δ/2) J_F(Y_{k+1})`, `sub[k] = −I − (δ/2) J_F(Y_k)` for
/// `k ≥ 1` (`sub[0]` unused: `Y₀` is not an unknown).
#[derive(Clone, Debug)]
pub struct GnJacobian {
    d: usize,
    n: usize,
    diag: Vec<f64>,
    sub: Vec<f64>,
}

impl GnJacobian {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn diag_block(&self, k: usize) -> &[f64] {
        let s = self.d * self.d;
        &self.diag[k * s..(k + 1) * s]
    }

    pub fn sub_block(&self, k: usize) -> &[f64] {
        let s = self.d * self.d;
        &self.sub[k * s..(k + 1) * s]
    }

    /// `J v`
    pub fn apply(&self, v: &Columns) -> Columns {
        let d = self.d;
        let mut out = Columns::zeros(d, self.n);
        for k in 0..self.n {
            let mut acc = dense::matvec(self.diag_block(k), v.col(k), d);
            if k > 0 {
                let lo = dense::matvec(self.sub_block(k), v.col(k - 1), d);
                for i in 0..d {
                    acc[i] += lo[i];
                }
            }
            out.col_mut(k).copy_from_slice(&acc);
        }
        out
    }

    /// `Jᵀ v`
    pub fn apply_transpose(&self, v: &Columns) -> Columns {
        let d = self.d;
        let mut out = Columns::zeros(d, self.n);
        for k in 0..self.n {
            let mut acc = dense::matvec_t(self.diag_block(k), v.col(k), d);
            if k + 1 < self.n {
                let up = dense::matvec_t(self.sub_block(k + 1), v.col(k + 1), d);
                for i in 0..d {
                    acc[i] += up[i];
                }
            }
            out.col_mut(k).copy_from_slice(&acc);
        }
        out
    }

    /// `JᵀJ` as a symmetric block-tridiagonal matrix.
    pub fn normal_matrix(&self) -> BlockTridiag {
        let d = self.d;
        let mut m = BlockTridiag::zeros(d, self.n);
        for k in 0..self.n {
            let mut blk = dense::matmul_tn(self.diag_block(k), self.diag_block(k), d);
            if k + 1 < self.n {
                let extra = dense::matmul_tn(self.sub_block(k + 1), self.sub_block(k + 1), d);
                for (a, b) in blk.iter_mut().zip(extra) {
                    *a += b;
                }
            }
            m.diag_block_mut(k).copy_from_slice(&blk);
            if k > 0 {
                let c = dense::matmul_tn(self.diag_block(k), self.sub_block(k), d);
                m.sub_block_mut(k).copy_from_slice(&c);
            }
        }
        m
    }
}

pub(crate) fn gn_jacobian_unchecked(spec: &IvpSpec, y: &Trajectory) -> GnJacobian {
    let d = spec.dim();
    let n = spec.steps;
    let s = d * d;
    let half = 0.5 * spec.step();
    let mut diag = vec![0.0; n * s];
    let mut sub = vec![0.0; n * s];
    let mut jac = vec![0.0; s];
    for k in 0..n {
        spec.system.jacobian_into(y.state(k + 1), &mut jac);
        let blk = &mut diag[k * s..(k + 1) * s];
        for (b, j) in blk.iter_mut().zip(&jac) {
            *b = -half * j;
        }
        for i in 0..d {
            blk[i * d + i] += 1.0;
        }
        if k > 0 {
            spec.system.jacobian_into(y.state(k), &mut jac);
            let blk = &mut sub[k * s..(k + 1) * s];
            for (b, j) in blk.iter_mut().zip(&jac) {
                *b = -half * j;
            }
            for i in 0..d {
                blk[i * d + i] -= 1.0;
            }
        }
    }
    GnJacobian { d, n, diag, sub }
}

pub fn gn_jacobian(spec: &IvpSpec, y: &Trajectory) -> Result<GnJacobian> {
    check(spec, y)?;
    Ok(gn_jacobian_unchecked(spec, y))
}

/// `Λ(Yₖ) = (δ/2)(YₖᵀAYₖ + Yₖ₋₁ᵀAYₖ₋₁)`, column per step.
pub fn lambda_op(spec: &IvpSpec, y: &Trajectory) -> Result<Columns> {
    check(spec, y)?;
    let d = spec.dim();
    let half = 0.5 * spec.step();
    let mut out = Columns::zeros(d, spec.steps);
    let mut prev = spec.system.quadratic_part(y.state(0));
    for k in 1..=spec.steps {
        let cur = spec.system.quadratic_part(y.state(k));
        let col = out.col_mut(k - 1);
        for i in 0..d {
            col[i] = half * (cur[i] + prev[i]);
        }
        prev = cur;
    }
    Ok(out)
}

/// `B(Yₖ) = (δ/2) D (Yₖ + Yₖ₋₁) − Yₖ + Yₖ₋₁`.
pub fn b_op(spec: &IvpSpec, y: &Trajectory) -> Result<Columns> {
    check(spec, y)?;
    let d = spec.dim();
    let half = 0.5 * spec.step();
    let dm = spec.system.linear();
    let mut out = Columns::zeros(d, spec.steps);
    for k in 1..=spec.steps {
        let cur = y.state(k);
        let prev = y.state(k - 1);
        let sum: Vec<f64> = cur.iter().zip(prev).map(|(a, b)| a + b).collect();
        let dsum = dense::matvec(dm, &sum, d);
        let col = out.col_mut(k - 1);
        for i in 0..d {
            col[i] = half * dsum[i] - cur[i] + prev[i];
        }
    }
    Ok(out)
}

/// `cₖ = (δ/2)(gₖ + gₖ₋₁)`.
pub fn c_field(spec: &IvpSpec) -> Columns {
    let d = spec.dim();
    let grid = spec.grid();
    let half = 0.5 * spec.step();
    let forcing = spec.system.forcing();
    let mut out = Columns::zeros(d, spec.steps);
    let mut prev = forcing.eval(grid.node(0));
    for k in 1..=spec.steps {
        let cur = forcing.eval(grid.node(k));
        let col = out.col_mut(k - 1);
        for i in 0..d {
            col[i] = half * (cur[i] + prev[i]);
        }
        prev = cur;
    }
    out
}

/// Writes `t,y1,…,yd` with `n + 1` rows (the `t = 0` row holds `y0`).
pub fn write_trajectory_csv<W: Write>(spec: &IvpSpec, y: &Trajectory, mut out: W) -> Result<()> {
    check(spec, y)?;
    let d = spec.dim();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=d).map(|i| format!("y{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    let grid = spec.grid();
    for k in 0..=spec.steps {
        let mut line = format!("{:.16e}", grid.node(k));
        for v in y.state(k) {
            line.push_str(&format!(",{v:.16e}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a trajectory CSV written by [`write_trajectory_csv`]. The first
/// data row must match `spec.y0`'s dimension; its values are ignored in
/// favour of `spec.y0`.
pub fn read_trajectory_csv<R: BufRead>(spec: &IvpSpec, input: R) -> Result<Trajectory> {
    let d = spec.dim();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if i == 0 || line.is_empty() {
            continue;
        }
        let values = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Syntax {
                line: i + 1,
                message: e.to_string(),
            })?;
        if values.len() != d + 1 {
            return Err(Error::Syntax {
                line: i + 1,
                message: format!("expected {} columns, found {}", d + 1, values.len()),
            });
        }
        rows.push(values[1..].to_vec());
    }
    if rows.len() != spec.steps + 1 {
        return Err(Error::invalid(format!(
            "trajectory file has {} rows, grid needs {}",
            rows.len(),
            spec.steps + 1
        )));
    }
    let data = rows.into_iter().skip(1).flatten().collect();
    Trajectory::new(spec, Columns::from_vec(d, spec.steps, data)?)
}
