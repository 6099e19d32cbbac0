//! Baseline integrators: Dormand–Prince 5(4), Bogacki–Shampine 3(2), both
//! adaptive with dense output, and the explicit modified Euler march.

use serde::Serialize;

use crate::discretize::Trajectory;
use crate::error::{Error, Result};
use crate::field::Columns;
use crate::model::{Grid, IvpSpec};

pub const DEFAULT_RTOL: f64 = 1e-3;
pub const DEFAULT_ATOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RkMethod {
    Rk45,
    Rk23,
}

impl std::fmt::Display for RkMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RkMethod::Rk45 => "rk45",
            RkMethod::Rk23 => "rk23",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step; `None` means a tenth of the horizon.
    pub max_step: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
            max_step: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Accepted steps of an adaptive run plus per-step interpolation data.
///
/// `dense[j]` covers `[times[j], times[j + 1]]`. For `Rk45` it holds the five
/// quartic coefficient vectors; for `Rk23` it holds `h·f` at both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegratorOutput {
    pub method: RkMethod,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub dense: Vec<Vec<f64>>,
    pub stats: IntegratorStats,
}

impl IntegratorOutput {
    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }

    /// Interpolated state at `t` within the integrated range.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        let (t0, t1) = (self.times[0], self.final_time());
        if !(t >= t0 && t <= t1) {
            return Err(Error::invalid(format!("t = {t} outside the integrated range [{t0}, {t1}]")));
        }
        let j = self.times.partition_point(|&x| x < t);
        if j < self.times.len() && self.times[j] == t {
            return Ok(self.states[j].clone());
        }
        let seg = j - 1;
        let h = self.times[seg + 1] - self.times[seg];
        let theta = (t - self.times[seg]) / h;
        let d = self.dim();
        let c = &self.dense[seg];
        let y0 = &self.states[seg];
        let y1 = &self.states[seg + 1];
        let out = match self.method {
            RkMethod::Rk45 => {
                let th1 = 1.0 - theta;
                (0..d)
                    .map(|i| {
                        c[i] + theta
                            * (c[d + i] + th1 * (c[2 * d + i] + theta * (c[3 * d + i] + th1 * c[4 * d + i])))
                    })
                    .collect()
            }
            RkMethod::Rk23 => {
                // cubic Hermite through (y0, h f0) and (y1, h f1)
                let t2 = theta * theta;
                let t3 = t2 * theta;
                let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
                let h10 = t3 - 2.0 * t2 + theta;
                let h01 = -2.0 * t3 + 3.0 * t2;
                let h11 = t3 - t2;
                (0..d)
                    .map(|i| h00 * y0[i] + h10 * c[i] + h01 * y1[i] + h11 * c[d + i])
                    .collect()
            }
        };
        Ok(out)
    }
}

struct Tableau {
    c: &'static [f64],
    a: &'static [&'static [f64]],
    /// error weights over all stages, including the FSAL stage
    e: &'static [f64],
    order: f64,
}

const DP5: Tableau = Tableau {
    c: &[0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
    a: &[
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
        &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ],
    e: &[
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ],
    order: 5.0,
};

const DP5_DENSE: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const BS3: Tableau = Tableau {
    c: &[0.0, 0.5, 0.75, 1.0],
    a: &[&[], &[0.5], &[0.0, 0.75], &[2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0]],
    e: &[-5.0 / 72.0, 1.0 / 12.0, 1.0 / 9.0, -1.0 / 8.0],
    order: 3.0,
};

pub fn rk45(spec: &IvpSpec, rtol: f64, atol: f64) -> Result<IntegratorOutput> {
    integrate(spec, RkMethod::Rk45, &IntegratorOptions { rtol, atol, max_step: None })
}

pub fn rk23(spec: &IvpSpec, rtol: f64, atol: f64) -> Result<IntegratorOutput> {
    integrate(spec, RkMethod::Rk23, &IntegratorOptions { rtol, atol, max_step: None })
}

fn err_norm(err: &[f64], y: &[f64], y_new: &[f64], opts: &IntegratorOptions) -> f64 {
    err.iter()
        .zip(y.iter().zip(y_new))
        .map(|(e, (a, b))| (e / (opts.atol + opts.rtol * a.abs().max(b.abs()))).abs())
        .fold(0.0, f64::max)
}

/// Adaptive embedded Runge–Kutta run over `[0, T]` with a PI step controller.
pub fn integrate(spec: &IvpSpec, method: RkMethod, opts: &IntegratorOptions) -> Result<IntegratorOutput> {
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::invalid("rtol and atol must be positive"));
    }
    let tab = match method {
        RkMethod::Rk45 => &DP5,
        RkMethod::Rk23 => &BS3,
    };
    let sys = &spec.system;
    let d = spec.dim();
    let t_end = spec.horizon;
    let h_max = opts.max_step.unwrap_or(t_end / 10.0).min(t_end);
    let stages = tab.c.len();

    let mut stats = IntegratorStats::default();
    let f = |stats: &mut IntegratorStats, t: f64, y: &[f64], out: &mut [f64]| {
        stats.rhs_evals += 1;
        sys.eval_into(t, y, out);
    };

    let mut t = 0.0;
    let mut y = spec.y0.clone();
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; d]; stages];
    f(&mut stats, t, &y, &mut k[0]);

    // initial step from the usual two-derivative heuristic
    let scale: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let rms = |v: &[f64]| (v.iter().zip(&scale).map(|(a, s)| (a / s).powi(2)).sum::<f64>() / d as f64).sqrt();
    let d0 = rms(&y);
    let d1 = rms(&k[0]);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(h_max);
    let y1: Vec<f64> = (0..d).map(|i| y[i] + h * k[0][i]).collect();
    let mut f1 = vec![0.0; d];
    f(&mut stats, h, &y1, &mut f1);
    let diff: Vec<f64> = (0..d).map(|i| f1[i] - k[0][i]).collect();
    let d2 = rms(&diff) / h;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / tab.order)
    };
    h = (100.0 * h).min(h1).min(h_max);

    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let mut dense = Vec::new();
    let mut err_old: f64 = 1e-4;
    let beta = 0.4 / tab.order;
    let alpha = 0.7 / tab.order;
    let mut y_new = vec![0.0; d];
    let mut tmp = vec![0.0; d];
    let mut err = vec![0.0; d];
    let mut last_rejected = false;

    while t < t_end {
        if t + h >= t_end || t + 1.01 * h >= t_end {
            h = t_end - t;
        }
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1e-300);
        if h < h_min {
            return Err(Error::MinStepReached {
                t,
                partial: Box::new(IntegratorOutput {
                    method,
                    times,
                    states,
                    dense,
                    stats,
                }),
            });
        }

        for s in 1..stages {
            for i in 0..d {
                let mut acc = 0.0;
                for (j, a) in tab.a[s].iter().enumerate() {
                    acc += a * k[j][i];
                }
                tmp[i] = y[i] + h * acc;
            }
            f(&mut stats, t + tab.c[s] * h, &tmp, &mut k[s]);
        }
        // last stage is evaluated at the new solution (FSAL)
        y_new.copy_from_slice(&tmp);
        for i in 0..d {
            err[i] = h * (0..stages).map(|s| tab.e[s] * k[s][i]).sum::<f64>();
        }
        let en = err_norm(&err, &y, &y_new, opts);

        if !y_new.iter().all(|v| v.is_finite()) || !en.is_finite() {
            stats.rejected += 1;
            h *= 0.2;
            last_rejected = true;
            continue;
        }

        if en <= 1.0 {
            let t_new = if h == t_end - t { t_end } else { t + h };
            let coeffs = match method {
                RkMethod::Rk45 => {
                    let mut c = vec![0.0; 5 * d];
                    for i in 0..d {
                        let r2 = y_new[i] - y[i];
                        let r3 = h * k[0][i] - r2;
                        let r4 = r2 - h * k[6][i] - r3;
                        let r5 = h * (0..7).map(|s| DP5_DENSE[s] * k[s][i]).sum::<f64>();
                        c[i] = y[i];
                        c[d + i] = r2;
                        c[2 * d + i] = r3;
                        c[3 * d + i] = r4;
                        c[4 * d + i] = r5;
                    }
                    c
                }
                RkMethod::Rk23 => {
                    let mut c = vec![0.0; 2 * d];
                    for i in 0..d {
                        c[i] = h * k[0][i];
                        c[d + i] = h * k[3][i];
                    }
                    c
                }
            };
            dense.push(coeffs);
            t = t_new;
            y.copy_from_slice(&y_new);
            let last = stages - 1;
            let fsal = k[last].clone();
            k[0] = fsal;
            times.push(t);
            states.push(y.clone());
            stats.accepted += 1;

            let mut fac = 0.9 * en.max(1e-10).powf(-alpha) * err_old.powf(beta);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            err_old = en.max(1e-4);
            h = (h * fac).min(h_max);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (0.9 * en.powf(-1.0 / tab.order)).max(0.2);
            h *= fac;
            last_rejected = true;
        }
    }

    Ok(IntegratorOutput {
        method,
        times,
        states,
        dense,
        stats,
    })
}

/// Dense-output samples at the grid nodes `t₁ … tₙ` (no extrapolation).
pub fn resample(out: &IntegratorOutput, grid: &Grid) -> Result<Trajectory> {
    let last = out.final_time();
    if grid.horizon > last || out.times.is_empty() {
        return Err(Error::invalid(format!(
            "grid horizon {} exceeds the integrated range (ends at {last})",
            grid.horizon
        )));
    }
    let d = out.dim();
    let mut cols = Columns::zeros(d, grid.steps);
    for k in 1..=grid.steps {
        let y = out.eval(grid.node(k))?;
        cols.col_mut(k - 1).copy_from_slice(&y);
    }
    Ok(Trajectory {
        y0: out.states[0].clone(),
        cols,
    })
}

/// Explicit predictor–corrector march on the uniform grid:
/// `Ỹ = Yₖ₋₁ + δF(tₖ₋₁, Yₖ₋₁)`, then `Yₖ = Yₖ₋₁ + (δ/2)(F(tₖ₋₁, Yₖ₋₁) + F(tₖ, Ỹ))`.
pub fn modified_euler(spec: &IvpSpec) -> Result<Trajectory> {
    let d = spec.dim();
    let grid = spec.grid();
    let delta = grid.step();
    let sys = &spec.system;
    let mut traj = Trajectory::zeros(spec);
    let mut prev = spec.y0.clone();
    let mut f0 = vec![0.0; d];
    let mut f1 = vec![0.0; d];
    let mut pred = vec![0.0; d];
    for k in 1..=spec.steps {
        sys.eval_into(grid.node(k - 1), &prev, &mut f0);
        for i in 0..d {
            pred[i] = prev[i] + delta * f0[i];
        }
        sys.eval_into(grid.node(k), &pred, &mut f1);
        let col = traj.cols.col_mut(k - 1);
        for i in 0..d {
            col[i] = prev[i] + 0.5 * delta * (f0[i] + f1[i]);
        }
        if !col.iter().all(|v| v.is_finite() && v.abs() < 1e150) {
            return Err(Error::Diverged { step: k });
        }
        prev.copy_from_slice(col);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize;
    use crate::model::{registry, Forcing, Params, QuadraticSystem};

    fn scalar(a: f64, dlin: f64, y0: f64, t: f64, n: usize) -> IvpSpec {
        let sys = QuadraticSystem::new("scalar", vec![vec![a]], vec![dlin], Forcing::zero(1)).unwrap();
        IvpSpec::new(sys, vec![y0], t, n).unwrap()
    }

    fn endpoint(out: &IntegratorOutput) -> f64 {
        out.states.last().unwrap()[0]
    }

    #[test]
    fn exponential_and_riccati() {
        let exp = scalar(0.0, 1.0, 1.0, 1.0, 10);
        for m in [RkMethod::Rk45, RkMethod::Rk23] {
            let out = integrate(&exp, m, &IntegratorOptions::default()).unwrap();
            assert!((endpoint(&out) - std::f64::consts::E).abs() < 10.0 * DEFAULT_RTOL);
            assert_eq!(*out.times.last().unwrap(), 1.0);
            assert!(out.times.windows(2).all(|w| w[0] < w[1]));
        }
        let ric = scalar(-1.0, 0.0, 1.0, 1.0, 10);
        let out = rk45(&ric, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        assert!((endpoint(&out) - 0.5).abs() < 10.0 * DEFAULT_RTOL);
    }

    #[test]
    fn order_slopes() {
        let exp = scalar(0.0, 1.0, 1.0, 1.0, 10);
        for (m, min_slope) in [(RkMethod::Rk45, 3.5), (RkMethod::Rk23, 1.8)] {
            let errs: Vec<(f64, f64)> = [1e-3, 1e-5, 1e-7, 1e-9]
                .iter()
                .map(|&rtol| {
                    let opts = IntegratorOptions { rtol, atol: rtol * 1e-3, max_step: None };
                    let out = integrate(&exp, m, &opts).unwrap();
                    let steps = out.stats.accepted as f64;
                    (steps, (endpoint(&out) - std::f64::consts::E).abs())
                })
                .collect();
            // error against step count: slope of log(err) vs log(1/steps)
            let (s0, e0) = errs[0];
            let (s1, e1) = errs[errs.len() - 1];
            let slope = (e0 / e1).ln() / (s1 / s0).ln();
            assert!(slope >= min_slope, "{m}: slope {slope}, {errs:?}");
        }
    }

    #[test]
    fn logistic_endpoint_tight_tolerance() {
        let spec = registry("logistic", &Params::new()).unwrap();
        let opts = IntegratorOptions { rtol: 1e-8, atol: 1e-12, max_step: None };
        let out = integrate(&spec, RkMethod::Rk45, &opts).unwrap();
        let (r, y0, t) = (5.0f64, 0.1f64, 2.0f64);
        let exact = 1.0 / (1.0 + ((1.0 - y0) / y0) * (-r * t).exp());
        assert!((endpoint(&out) - exact).abs() < 1e-6);
    }

    #[test]
    fn resample_matches_stored_and_analytic() {
        let exp = scalar(0.0, 1.0, 1.0, 1.0, 50);
        let out = rk45(&exp, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        for (t, y) in out.times.iter().zip(&out.states) {
            assert_eq!(&out.eval(*t).unwrap(), y);
        }
        for m in [RkMethod::Rk45, RkMethod::Rk23] {
            let out = integrate(&exp, m, &IntegratorOptions::default()).unwrap();
            let tr = resample(&out, &exp.grid()).unwrap();
            for k in 1..=50 {
                let t = exp.grid().node(k);
                assert!((tr.state(k)[0] - t.exp()).abs() < 10.0 * DEFAULT_RTOL * t.exp());
            }
        }
        let longer = Grid::new(2.0, 10).unwrap();
        assert!(resample(&out, &longer).is_err());
        assert!(out.eval(-0.1).is_err());
    }

    #[test]
    fn logistic_resampled_objective_is_small() {
        let spec = registry("logistic", &Params::new()).unwrap();
        let out = rk45(&spec, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let tr = resample(&out, &spec.grid()).unwrap();
        let p = discretize::objective(&spec, &tr).unwrap();
        assert!(p < 1e-8, "{p}");
    }

    #[test]
    fn lorenz_bounded_and_pairs_separate() {
        let spec = registry("lorenz", &Params::new()).unwrap();
        let a = rk45(&spec, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        let b = rk23(&spec, DEFAULT_RTOL, DEFAULT_ATOL).unwrap();
        assert!(a.states.iter().flatten().all(|v| v.abs() < 60.0));
        let ta = resample(&a, &spec.grid()).unwrap();
        let tb = resample(&b, &spec.grid()).unwrap();
        let sep = |k: usize| {
            ta.state(k).iter().zip(tb.state(k)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let early = (1..=500).map(sep).fold(0.0, f64::max);
        let late = (9000..=10_000).map(sep).fold(0.0, f64::max);
        assert!(late > early, "{early} vs {late}");
    }

    #[test]
    fn deterministic() {
        let spec = registry("memristor", &Params::new()).unwrap();
        assert_eq!(
            rk45(&spec, DEFAULT_RTOL, DEFAULT_ATOL).unwrap(),
            rk45(&spec, DEFAULT_RTOL, DEFAULT_ATOL).unwrap()
        );
    }

    #[test]
    fn min_step_underflow_returns_partial() {
        // y' = y² blows up at t = 1
        let spec = scalar(1.0, 0.0, 1.0, 2.0, 10);
        match rk45(&spec, DEFAULT_RTOL, DEFAULT_ATOL) {
            Err(Error::MinStepReached { t, partial }) => {
                assert!(t < 1.0 + 1e-6 && t > 0.9);
                assert!(partial.stats.accepted > 0);
            }
            other => panic!("expected MinStepReached, got {:?}", other.map(|o| o.stats)),
        }
        assert!(rk45(&spec, 0.0, 1.0).is_err());
    }

    #[test]
    fn modified_euler_linear_and_equilibrium() {
        let lam = -0.7;
        let spec = scalar(0.0, lam, 2.0, 1.0, 20);
        let tr = modified_euler(&spec).unwrap();
        let delta = spec.step();
        let g = 1.0 + delta * lam + 0.5 * (delta * lam).powi(2);
        for k in 1..=20 {
            let exact = 2.0 * g.powi(k as i32);
            assert!((tr.state(k)[0] - exact).abs() <= 1e-13 * exact.abs());
        }
        let mut p = Params::new();
        p.insert("y0".into(), 1.0);
        let eq = registry("logistic", &p).unwrap();
        assert!(modified_euler(&eq).unwrap().cols.as_slice().iter().all(|&v| v == 1.0));
        let blow = scalar(1.0, 0.0, 1.0, 10.0, 10);
        assert!(matches!(modified_euler(&blow), Err(Error::Diverged { .. })));
    }
}
