//! Damped Newton / Gauss–Newton steps on `Π_ρ` with Nielsen's damping
//! update. The system matrix is block-tridiagonal, so a step costs `O(n d³)`.

use crate::canonical::{collect_unchecked, DualField};
use crate::discretize::{gn_jacobian_unchecked, residuals_unchecked, Trajectory};
use crate::field::Columns;
use crate::model::IvpSpec;

const MAX_TRIES: usize = 60;

pub(super) struct Damping {
    mu: Option<f64>,
    nu: f64,
}

impl Damping {
    pub fn new() -> Self {
        Self { mu: None, nu: 2.0 }
    }

    fn grow(&mut self) {
        if let Some(mu) = self.mu.as_mut() {
            *mu *= self.nu;
        }
        self.nu *= 2.0;
    }
}

pub(super) enum StepResult {
    /// Gradient already below the requested tolerance.
    Stationary,
    Accepted {
        y: Trajectory,
        value: f64,
        step_norm: f64,
        rejected: usize,
    },
    /// No damping produced a decrease.
    Stalled { grad_inf: f64, rejected: usize },
}

/// `ρ(Y − c)`, with `c = 0` when absent.
fn offset(y: &Trajectory, center: Option<&Columns>) -> Columns {
    let mut v = y.cols.clone();
    if let Some(c) = center {
        v.axpy(-1.0, c);
    }
    v
}

pub(super) fn value(spec: &IvpSpec, y: &Trajectory, rho: f64, center: Option<&Columns>) -> f64 {
    let pen = if rho == 0.0 { 0.0 } else { offset(y, center).norm_sq() };
    0.5 * residuals_unchecked(spec, y).norm_sq() + 0.5 * rho * pen
}

/// One step from `y` (with `Π_ρ(y) = current`). `second_order` adds the
/// residual-curvature blocks `G(σ)`, `σ = −r`, to `JᵀJ`, giving the exact
/// Hessian of `Π_ρ`; otherwise the step is Gauss–Newton.
pub(super) fn damped_step(
    spec: &IvpSpec,
    y: &Trajectory,
    current: f64,
    rho: f64,
    center: Option<&Columns>,
    second_order: bool,
    grad_tol: f64,
    damping: &mut Damping,
) -> StepResult {
    let r = residuals_unchecked(spec, y);
    let jac = gn_jacobian_unchecked(spec, y);
    let mut g = jac.apply_transpose(&r);
    if rho != 0.0 {
        g.axpy(rho, &offset(y, center));
    }
    let grad_inf = g.max_abs();
    if grad_inf <= grad_tol {
        return StepResult::Stationary;
    }

    let mut h = jac.normal_matrix();
    if second_order {
        let sig = r.scaled(-1.0);
        let form = collect_unchecked(spec, &DualField { sig });
        for (k, gk) in form.g.iter().enumerate() {
            for (a, b) in h.diag_block_mut(k).iter_mut().zip(gk.entries()) {
                *a += b;
            }
        }
    }
    h.add_diagonal(rho);
    if damping.mu.is_none() {
        damping.mu = Some(1e-10 * h.max_diagonal().abs().max(1e-300));
    }

    let ynorm = y.cols.norm();
    let rhs: Vec<f64> = g.as_slice().iter().map(|v| -v).collect();
    let mut rejected = 0;
    for _ in 0..MAX_TRIES {
        let mu = damping.mu.unwrap();
        let mut hm = h.clone();
        hm.add_diagonal(mu);
        let Some(chol) = hm.factor() else {
            damping.grow();
            rejected += 1;
            continue;
        };
        let delta = Columns::from_vec(spec.dim(), spec.steps, chol.solve(&rhs)).expect("shape");
        let step_norm = delta.norm();
        if !step_norm.is_finite() {
            damping.grow();
            rejected += 1;
            continue;
        }
        if step_norm <= 1e-15 * (ynorm + 1e-15) {
            break;
        }
        let pred = 0.5 * (mu * delta.norm_sq() - g.dot(&delta));
        let mut y_new = y.clone();
        y_new.cols.axpy(1.0, &delta);
        let v_new = value(spec, &y_new, rho, center);
        let actual = current - v_new;
        if v_new.is_finite() && pred > 0.0 && actual > 0.0 {
            let gain = actual / pred;
            let factor = (1.0 - (2.0 * gain - 1.0).powi(3)).max(1.0 / 3.0);
            damping.mu = Some((mu * factor).max(1e-300));
            damping.nu = 2.0;
            return StepResult::Accepted {
                y: y_new,
                value: v_new,
                step_norm,
                rejected,
            };
        }
        damping.grow();
        rejected += 1;
    }
    StepResult::Stalled { grad_inf, rejected }
}
