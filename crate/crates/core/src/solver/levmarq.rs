use std::time::Instant;

use super::damped::{self, damped_step, Damping, StepResult};
use super::{check_start, finish, Iterations, Method, Outcome, RhoStep, SolveConfig, SolveReport, SolveStatus};
use crate::discretize::Trajectory;
use crate::error::Result;
use crate::model::IvpSpec;

/// Levenberg–Marquardt on the residual field: Gauss–Newton normal equations
/// `(JᵀJ + μI)Δ = −Jᵀr` solved block-tridiagonally, `μ` adapted by gain
/// ratio. `P` never increases. Stops once `‖∇P‖∞ ≤ inner_tol`.
pub fn solve_levmarq(spec: &IvpSpec, cfg: &SolveConfig, start: Option<&Trajectory>) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut y = check_start(spec, start)?;
    let mut value = damped::value(spec, &y, 0.0, None);
    let mut damping = Damping::new();
    let mut it = Iterations {
        outer: 1,
        ..Default::default()
    };
    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIterations;
    let mut inner = 0;
    while inner < cfg.max_inner {
        match damped_step(spec, &y, value, 0.0, None, false, cfg.inner_tol, &mut damping) {
            StepResult::Stationary => {
                status = SolveStatus::Converged;
                break;
            }
            StepResult::Stalled { grad_inf, rejected } => {
                it.rejected_steps += rejected;
                // a zero objective cannot be lowered further
                if value == 0.0 || grad_inf <= 10.0 * cfg.inner_tol {
                    status = SolveStatus::Converged;
                }
                break;
            }
            StepResult::Accepted {
                y: y_new,
                value: v,
                rejected,
                ..
            } => {
                inner += 1;
                it.inner += 1;
                it.newton_steps += 1;
                it.rejected_steps += rejected;
                y = y_new;
                value = v;
                history.push(value);
            }
        }
    }
    let rho_trace = vec![RhoStep {
        rho: 0.0,
        objective: value,
        inner_iterations: inner,
        converged: status == SolveStatus::Converged,
    }];
    finish(
        spec,
        cfg,
        Method::LevMarq,
        Outcome {
            y,
            rho: 0.0,
            center: None,
            rho_trace,
            iterations: it,
            history,
            status,
        },
        started,
    )
}
