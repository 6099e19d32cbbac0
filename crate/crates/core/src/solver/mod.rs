//! Trajectory optimizers for `P(Y)`.
//!
//! * [`solve_primal_dual`]: canonical primal–dual alternation under a
//!   geometric `ρ` continuation of `Π_ρ(Y) = P(Y) + ½ρ Σ‖Yₖ‖²`.
//! * [`solve_levmarq`]: damped Gauss–Newton on the residual field.
//! * [`trapezoidal_march`]: the implicit trapezoidal rule, step by step.

mod damped;
mod levmarq;
mod march;
mod primal_dual;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

pub use levmarq::solve_levmarq;
pub use march::{step_fixed_point, trapezoidal_march};
pub use primal_dual::{canonical_y_step, solve_primal_dual, xi_rho};

use crate::canonical::{self, CertVerdict, DualField, TrialityCertificate};
use crate::discretize::{self, Trajectory};
use crate::error::{Error, Result};
use crate::field::Columns;
use crate::model::IvpSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PrimalDual,
    #[serde(rename = "levmarq")]
    LevMarq,
    Hybrid,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::PrimalDual => "primal-dual",
            Method::LevMarq => "levmarq",
            Method::Hybrid => "hybrid",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal-dual" => Ok(Method::PrimalDual),
            "levmarq" => Ok(Method::LevMarq),
            "hybrid" => Ok(Method::Hybrid),
            other => Err(Error::InvalidConfig(format!(
                "unknown method `{other}` (expected primal-dual, levmarq or hybrid)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub rho0: f64,
    pub rho_shrink: f64,
    pub rho_min: f64,
    /// Finish the continuation with an unperturbed (`ρ = 0`) phase.
    pub finish_unperturbed: bool,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub max_inner: usize,
    pub cert_tol: f64,
    /// Random perturbation probes run around a certified global minimum.
    pub probes: usize,
    pub seed: u64,
    pub method: Method,
    /// Centre of the `½ρ‖Y − Y_c‖²` perturbation.
    pub anchor: Anchor,
}

/// Where the perturbation term pulls the iterate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Anchor {
    /// `½ρ‖Y‖²` regardless of the start.
    Origin,
    /// `½ρ‖Y − Y_start‖²`; the origin when no start is given. A seeded run
    /// then never ends with `Π_ρ` above `P(Y_start)`.
    #[default]
    Start,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            rho0: 1.0,
            rho_shrink: 0.9,
            rho_min: 1e-8,
            finish_unperturbed: true,
            max_outer: 500,
            inner_tol: 1e-12,
            max_inner: 200,
            cert_tol: canonical::DEFAULT_CERT_TOL,
            probes: 1000,
            seed: 0,
            method: Method::PrimalDual,
            anchor: Anchor::Start,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.rho0 >= 0.0 && self.rho0.is_finite()) {
            return bad("rho0 must be finite and non-negative");
        }
        if !(self.rho_shrink > 0.0 && self.rho_shrink < 1.0) {
            return bad("rho_shrink must lie in (0, 1)");
        }
        if !(self.rho_min > 0.0 && self.rho_min.is_finite()) {
            return bad("rho_min must be positive");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.inner_tol > 0.0) || !(self.cert_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        Ok(())
    }

    /// `ρ₀, γρ₀, …`, clamped to end exactly at `ρ_min` (or just `[ρ₀]` when
    /// `ρ₀ ≤ ρ_min`), at most `max_outer` entries.
    pub fn rho_schedule(&self) -> Vec<f64> {
        let mut out = vec![self.rho0];
        let mut rho = self.rho0;
        while rho > self.rho_min && out.len() < self.max_outer {
            rho = (rho * self.rho_shrink).max(self.rho_min);
            out.push(rho);
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Diverged,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max-iterations",
            SolveStatus::Diverged => "diverged",
        })
    }
}

impl SolveStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            SolveStatus::Converged => 0,
            SolveStatus::MaxIterations => 2,
            SolveStatus::Diverged => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Iterations {
    pub outer: usize,
    pub inner: usize,
    pub canonical_steps: usize,
    pub newton_steps: usize,
    pub rejected_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RhoStep {
    pub rho: f64,
    /// `Π_ρ` at the end of the phase.
    pub objective: f64,
    pub inner_iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: Method,
    #[serde(skip)]
    pub final_y: Trajectory,
    #[serde(skip)]
    pub final_s: DualField,
    /// `P(final_y)`
    pub objective: f64,
    /// Value of `ρ` in the last phase.
    pub final_rho: f64,
    /// `Π_ρ(final_y)` at `final_rho`
    pub perturbed_objective: f64,
    pub grad_norm: f64,
    pub rho_trace: Vec<RhoStep>,
    pub certificate: Option<TrialityCertificate>,
    /// Smallest `P(Y') − P(Y)` over random probes `Y' = Y + noise`, run
    /// when the certificate claims a global minimum.
    pub probe_min_delta: Option<f64>,
    pub iterations: Iterations,
    /// `P` after every accepted step.
    pub history: Vec<f64>,
    pub status: SolveStatus,
    pub wallclock: f64,
}

/// `Π_ρ(Y) = P(Y) + ½ρ Σ‖Yₖ − cₖ‖²`, `c = 0` unless a centre is given.
pub fn perturbed_objective(spec: &IvpSpec, y: &Trajectory, rho: f64, center: Option<&Columns>) -> Result<f64> {
    discretize::check(spec, y)?;
    if center.is_some_and(|c| !c.same_shape(&y.cols)) {
        return Err(Error::invalid("perturbation centre has the wrong shape"));
    }
    Ok(damped::value(spec, y, rho, center))
}

fn check_start(spec: &IvpSpec, start: Option<&Trajectory>) -> Result<Trajectory> {
    match start {
        Some(y) => {
            discretize::check(spec, y)?;
            if y.y0 != spec.y0 {
                return Err(Error::invalid("start trajectory has a different initial state"));
            }
            if !y.cols.is_finite() {
                return Err(Error::invalid("start trajectory has non-finite entries"));
            }
            Ok(y.clone())
        }
        None => Ok(Trajectory::zeros(spec)),
    }
}

/// Smallest `P(Y + ε) − P(Y)` over `count` Gaussian probes of scale `scale`.
pub fn probe_minimality(spec: &IvpSpec, y: &Trajectory, count: usize, scale: f64, seed: u64) -> Result<f64> {
    let base = discretize::objective(spec, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let mut probe = y.clone();
    for _ in 0..count {
        for (p, v) in probe.cols.as_mut_slice().iter_mut().zip(y.cols.as_slice()) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *p = v + scale * z;
        }
        worst = worst.min(discretize::objective(spec, &probe)? - base);
    }
    Ok(worst)
}

struct Outcome {
    y: Trajectory,
    rho: f64,
    center: Option<Columns>,
    rho_trace: Vec<RhoStep>,
    iterations: Iterations,
    history: Vec<f64>,
    status: SolveStatus,
}

fn finish(spec: &IvpSpec, cfg: &SolveConfig, method: Method, out: Outcome, started: Instant) -> Result<SolveReport> {
    let objective = discretize::objective(spec, &out.y)?;
    let final_s = canonical::dual_map(spec, &out.y)?;
    let (gy, _) = canonical::xi_gradient(spec, &out.y, &final_s)?;
    let grad_norm = gy.norm();
    let certificate = match canonical::certify(spec, &final_s, &out.y, cfg.cert_tol) {
        Ok(c) => Some(c),
        Err(Error::NotCritical { .. }) => None,
        Err(e) => return Err(e),
    };
    let probe_min_delta = match &certificate {
        Some(c) if c.verdict == CertVerdict::GlobalMinimum && cfg.probes > 0 => {
            Some(probe_minimality(spec, &out.y, cfg.probes, 1e-4, cfg.seed)?)
        }
        _ => None,
    };
    let report = SolveReport {
        method,
        perturbed_objective: damped::value(spec, &out.y, out.rho, out.center.as_ref()),
        final_y: out.y,
        final_s,
        objective,
        final_rho: out.rho,
        grad_norm,
        rho_trace: out.rho_trace,
        certificate,
        probe_min_delta,
        iterations: out.iterations,
        history: out.history,
        status: out.status,
        wallclock: started.elapsed().as_secs_f64(),
    };
    if report.status == SolveStatus::Diverged {
        return Err(Error::Divergence(Box::new(report)));
    }
    Ok(report)
}

/// Dispatches on `cfg.method`; `Hybrid` polishes the primal–dual result with
/// Levenberg–Marquardt.
pub fn solve(spec: &IvpSpec, cfg: &SolveConfig, start: Option<&Trajectory>) -> Result<SolveReport> {
    cfg.validate()?;
    match cfg.method {
        Method::PrimalDual => solve_primal_dual(spec, cfg, start),
        Method::LevMarq => solve_levmarq(spec, cfg, start),
        Method::Hybrid => {
            let started = Instant::now();
            let pd = solve_primal_dual(spec, cfg, start)?;
            let lm = solve_levmarq(spec, cfg, Some(&pd.final_y))?;
            let mut rho_trace = pd.rho_trace;
            rho_trace.extend(lm.rho_trace);
            let mut history = pd.history;
            history.extend(lm.history);
            let it = Iterations {
                outer: pd.iterations.outer + lm.iterations.outer,
                inner: pd.iterations.inner + lm.iterations.inner,
                canonical_steps: pd.iterations.canonical_steps,
                newton_steps: pd.iterations.newton_steps + lm.iterations.newton_steps,
                rejected_steps: pd.iterations.rejected_steps + lm.iterations.rejected_steps,
            };
            Ok(SolveReport {
                method: Method::Hybrid,
                rho_trace,
                history,
                iterations: it,
                wallclock: started.elapsed().as_secs_f64(),
                ..lm
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(SolveConfig::default().validate().is_ok());
        let bad = [
            SolveConfig { rho0: -1.0, ..Default::default() },
            SolveConfig { rho_shrink: 1.0, ..Default::default() },
            SolveConfig { rho_min: 0.0, ..Default::default() },
            SolveConfig { max_inner: 0, ..Default::default() },
            SolveConfig { inner_tol: 0.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
        assert!("newton".parse::<Method>().is_err());
        assert_eq!("hybrid".parse::<Method>().unwrap(), Method::Hybrid);
    }

    #[test]
    fn schedule_is_geometric_and_clamped() {
        let cfg = SolveConfig { rho0: 1.0, rho_min: 1.3841e-2, ..Default::default() };
        let s = cfg.rho_schedule();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - 0.9).abs() < 1e-15);
        assert_eq!(*s.last().unwrap(), 1.3841e-2);
        assert_eq!(s.len(), 42);
        let fixed = SolveConfig { rho0: 1e-3, rho_min: 1e-3, ..Default::default() };
        assert_eq!(fixed.rho_schedule(), vec![1e-3]);
        let zero = SolveConfig { rho0: 0.0, ..Default::default() };
        assert_eq!(zero.rho_schedule(), vec![0.0]);
        let capped = SolveConfig { max_outer: 3, ..Default::default() };
        assert_eq!(capped.rho_schedule().len(), 3);
    }
}
