use std::collections::VecDeque;
use std::time::Instant;

use rayon::prelude::*;

use super::damped::{self, damped_step, Damping, StepResult};
use super::{check_start, Anchor, finish, Iterations, Method, Outcome, RhoStep, SolveConfig, SolveReport, SolveStatus};
use crate::canonical::{self, dual_map_unchecked, DualField, Recovery};
use crate::discretize::{self, Trajectory};
use crate::error::Result;
use crate::field::Columns;
use crate::linalg::{self, DEFAULT_RANK_TOL};
use crate::model::IvpSpec;

const DIVERGENCE_WINDOW: usize = 20;

/// `Ξ(Y, S) + ½ρ Σ‖Yₖ‖²`
pub fn xi_rho(spec: &IvpSpec, y: &Trajectory, s: &DualField, rho: f64) -> Result<f64> {
    Ok(canonical::xi_collected(spec, y, s)? + 0.5 * rho * y.cols.norm_sq())
}

/// `Yₖ = (G(σₖ) + ρI)⁺ (t(σₖ) + ρcₖ)`, the minimizer of `Ξ + ½ρ‖Y − c‖²` in
/// `Y` whenever every `G(σₖ) + ρI` is positive definite. `c` defaults to 0.
pub fn canonical_y_step(
    spec: &IvpSpec,
    s: &DualField,
    rho: f64,
    center: Option<&Columns>,
    rank_tol: f64,
) -> Result<Recovery> {
    let form = canonical::collect(spec, s)?;
    if center.is_some_and(|c| !c.same_shape(&form.t)) {
        return Err(crate::error::Error::invalid("perturbation centre has the wrong shape"));
    }
    let blocks: Vec<(Vec<f64>, bool)> = form
        .g
        .par_iter()
        .enumerate()
        .map(|(k, g)| {
            let mut m = g.clone();
            m.add_diagonal(rho);
            let (inv, truncated) = linalg::pinv_with_rank(&m, rank_tol)?;
            let mut rhs = form.t.col(k).to_vec();
            if let Some(c) = center {
                for (r, ci) in rhs.iter_mut().zip(c.col(k)) {
                    *r += rho * ci;
                }
            }
            Ok((inv.matvec(&rhs), truncated))
        })
        .collect::<Result<_>>()?;
    let mut traj = Trajectory::zeros(spec);
    let mut pinv_blocks = Vec::new();
    for (k, (yk, truncated)) in blocks.into_iter().enumerate() {
        traj.cols.col_mut(k).copy_from_slice(&yk);
        if truncated {
            pinv_blocks.push(k);
        }
    }
    Ok(Recovery {
        trajectory: traj,
        pinv_blocks,
    })
}

/// Canonical primal–dual alternation with `ρ` continuation.
///
/// Each inner iteration takes the exact `S`-step `S = Λ(Y) + B(Y) + C`, then
/// the canonical `Y`-step `(G + ρI)⁺t`, kept only if it lowers `Π_ρ`. Since
/// `G(σ) + ρI` is indefinite for most fields of interest, a damped Newton
/// correction on the same saddle system (Hessian `JᵀJ + G(σ) + ρI`) follows;
/// its step size decides convergence of the phase.
pub fn solve_primal_dual(spec: &IvpSpec, cfg: &SolveConfig, start: Option<&Trajectory>) -> Result<SolveReport> {
    cfg.validate()?;
    let started = Instant::now();
    let mut y = check_start(spec, start)?;
    let center = match cfg.anchor {
        Anchor::Start if start.is_some() => Some(y.cols.clone()),
        _ => None,
    };
    let c = center.as_ref();

    let mut schedule = cfg.rho_schedule();
    if cfg.finish_unperturbed && *schedule.last().unwrap() != 0.0 {
        schedule.push(0.0);
    }

    let mut it = Iterations::default();
    let mut history = Vec::new();
    let mut rho_trace = Vec::with_capacity(schedule.len());
    let mut status = SolveStatus::Converged;
    let mut window: VecDeque<f64> = VecDeque::with_capacity(DIVERGENCE_WINDOW + 1);
    let mut rho = schedule[0];

    'outer: for (phase, &r) in schedule.iter().enumerate() {
        rho = r;
        it.outer += 1;
        let mut value = damped::value(spec, &y, rho, c);
        let mut damping = Damping::new();
        let mut converged = false;
        let mut inner = 0;
        while inner < cfg.max_inner {
            inner += 1;
            it.inner += 1;

            let s = dual_map_unchecked(spec, &y);
            let cand = canonical_y_step(spec, &s, rho, c, DEFAULT_RANK_TOL)?.trajectory;
            let cand_value = damped::value(spec, &cand, rho, c);
            if cand_value.is_finite() && cand_value < value {
                y = cand;
                value = cand_value;
                it.canonical_steps += 1;
                history.push(discretize::objective(spec, &y)?);
            }

            match damped_step(spec, &y, value, rho, c, true, cfg.inner_tol, &mut damping) {
                StepResult::Stationary => converged = true,
                StepResult::Stalled { rejected, .. } => {
                    it.rejected_steps += rejected;
                    converged = true;
                }
                StepResult::Accepted {
                    y: y_new,
                    value: v,
                    step_norm,
                    rejected,
                } => {
                    it.rejected_steps += rejected;
                    it.newton_steps += 1;
                    y = y_new;
                    value = v;
                    history.push(discretize::objective(spec, &y)?);
                    converged = step_norm <= cfg.inner_tol * y.cols.norm().max(1.0);
                }
            }

            let p = discretize::objective(spec, &y)?;
            window.push_back(p);
            if window.len() > DIVERGENCE_WINDOW {
                window.pop_front();
            }
            let floor = window.iter().copied().fold(f64::INFINITY, f64::min);
            if !p.is_finite() || (p > 10.0 * floor && p > 1e-8) {
                status = SolveStatus::Diverged;
                rho_trace.push(RhoStep {
                    rho,
                    objective: value,
                    inner_iterations: inner,
                    converged: false,
                });
                break 'outer;
            }
            if converged {
                break;
            }
        }
        rho_trace.push(RhoStep {
            rho,
            objective: value,
            inner_iterations: inner,
            converged,
        });
        if !converged && phase + 1 == schedule.len() {
            status = SolveStatus::MaxIterations;
        }
    }

    finish(
        spec,
        cfg,
        Method::PrimalDual,
        Outcome {
            y,
            rho,
            center,
            rho_trace,
            iterations: it,
            history,
            status,
        },
        started,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{collect_unchecked, CertVerdict};
    use crate::model::{registry, Params};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(name: &str, n: usize, t: f64) -> IvpSpec {
        let mut p = Params::new();
        p.insert("n".into(), n as f64);
        p.insert("T".into(), t);
        registry(name, &p).unwrap()
    }

    #[test]
    fn y_step_minimizes_perturbed_xi() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for name in crate::model::SYSTEM_NAMES {
            let spec = small(name, 6, 0.6);
            let s = DualField {
                sig: Columns::from_fn(spec.dim(), 6, |_, _| rng.random_range(-1.0..1.0)),
            };
            // ρ large enough for every block to be positive definite
            let form = collect_unchecked(&spec, &s);
            let lo = form
                .g
                .iter()
                .map(|g| linalg::min_eig(g).unwrap())
                .fold(f64::INFINITY, f64::min);
            let rho = (-lo).max(0.0) + 0.5;
            let y = canonical_y_step(&spec, &s, rho, None, DEFAULT_RANK_TOL).unwrap().trajectory;
            let best = xi_rho(&spec, &y, &s, rho).unwrap();
            for _ in 0..100 {
                let mut probe = y.clone();
                for v in probe.cols.as_mut_slice() {
                    *v += rng.random_range(-1.0..1.0);
                }
                assert!(xi_rho(&spec, &probe, &s, rho).unwrap() >= best - 1e-12);
            }
        }
    }

    #[test]
    fn s_step_maximizes_xi() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for name in crate::model::SYSTEM_NAMES {
            let spec = small(name, 6, 0.6);
            let y = Trajectory::new(&spec, Columns::from_fn(spec.dim(), 6, |_, _| rng.random_range(-2.0..2.0))).unwrap();
            let s = canonical::dual_map(&spec, &y).unwrap();
            let best = canonical::xi_direct(&spec, &y, &s).unwrap();
            for _ in 0..100 {
                let mut probe = s.clone();
                for v in probe.sig.as_mut_slice() {
                    *v += rng.random_range(-1.0..1.0);
                }
                assert!(canonical::xi_direct(&spec, &y, &probe).unwrap() <= best + 1e-12);
            }
        }
    }

    #[test]
    fn logistic_default_solve() {
        let spec = registry("logistic", &Params::new()).unwrap();
        let rep = solve_primal_dual(&spec, &SolveConfig::default(), None).unwrap();
        assert!(rep.objective <= 1e-8, "{}", rep.objective);
        assert_eq!(rep.status, SolveStatus::Converged);
        let cert = rep.certificate.as_ref().expect("critical pair");
        assert_eq!(cert.verdict, CertVerdict::GlobalMinimum);
        assert_eq!(rep.objective, discretize::objective(&spec, &rep.final_y).unwrap());
    }

    #[test]
    fn fixed_rho_reports_perturbed_objective() {
        let spec = small("lorenz", 200, 1.0);
        let cfg = SolveConfig {
            rho0: 1e-3,
            rho_min: 1e-3,
            finish_unperturbed: false,
            ..Default::default()
        };
        let rep = solve_primal_dual(&spec, &cfg, None).unwrap();
        assert_eq!(rep.rho_trace.len(), 1);
        assert_eq!(rep.final_rho, 1e-3);
        let expect = rep.objective + 0.5e-3 * rep.final_y.cols.norm_sq();
        assert!((rep.perturbed_objective - expect).abs() <= 1e-12 * expect);
        assert!(rep.grad_norm <= 1e-3 * rep.final_y.cols.norm() + 1e-6);
    }

    #[test]
    fn anchored_run_never_worsens_seed() {
        let spec = small("memristor", 200, 20.0);
        let seed = crate::integrate::resample(
            &crate::integrate::rk45(&spec, 1e-3, 1e-6).unwrap(),
            &spec.grid(),
        )
        .unwrap();
        let p0 = discretize::objective(&spec, &seed).unwrap();
        let cfg = SolveConfig {
            rho_min: 1e-2,
            finish_unperturbed: false,
            ..Default::default()
        };
        let rep = solve_primal_dual(&spec, &cfg, Some(&seed)).unwrap();
        assert!(rep.perturbed_objective <= p0);
        let centered = super::super::perturbed_objective(&spec, &rep.final_y, 1e-2, Some(&seed.cols)).unwrap();
        assert_eq!(rep.perturbed_objective, centered);

        let origin = solve_primal_dual(&spec, &SolveConfig { anchor: Anchor::Origin, ..cfg }, Some(&seed)).unwrap();
        assert_ne!(origin.final_y, rep.final_y);
    }

    #[test]
    fn centred_y_step_minimizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let spec = small("lorenz", 5, 0.5);
        let s = DualField {
            sig: Columns::from_fn(3, 5, |_, _| rng.random_range(-0.5..0.5)),
        };
        let c = Columns::from_fn(3, 5, |_, _| rng.random_range(-3.0..3.0));
        let rho = 50.0;
        let y = canonical_y_step(&spec, &s, rho, Some(&c), DEFAULT_RANK_TOL).unwrap().trajectory;
        let f = |y: &Trajectory| {
            let mut d = y.cols.clone();
            d.axpy(-1.0, &c);
            canonical::xi_collected(&spec, y, &s).unwrap() + 0.5 * rho * d.norm_sq()
        };
        let best = f(&y);
        for _ in 0..100 {
            let mut probe = y.clone();
            for v in probe.cols.as_mut_slice() {
                *v += rng.random_range(-0.1..0.1);
            }
            assert!(f(&probe) >= best - 1e-10);
        }
    }

    #[test]
    fn deterministic() {
        let spec = small("memristor", 50, 5.0);
        let cfg = SolveConfig { rho_min: 1e-2, ..Default::default() };
        let a = solve_primal_dual(&spec, &cfg, None).unwrap();
        let b = solve_primal_dual(&spec, &cfg, None).unwrap();
        assert_eq!(a.final_y, b.final_y);
        assert_eq!(a.rho_trace, b.rho_trace);
        assert_eq!(a.history, b.history);
    }
}
