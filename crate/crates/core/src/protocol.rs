//! Benchmark protocol: integrate with the adaptive pairs, score both on the
//! uniform grid with `P`, refine the RK45 trajectory by optimization, and
//! keep whichever trajectory has the lower objective.

use serde::Serialize;

use crate::classify::{self, ClassifyConfig, Verdict};
use crate::discretize::{self, Trajectory};
use crate::error::Result;
use crate::integrate::{self, IntegratorOptions, RkMethod};
use crate::model::IvpSpec;
use crate::solver::{self, SolveConfig, SolveReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    #[serde(rename = "rk45")]
    Rk,
    Cd,
}

impl std::fmt::Display for Winner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Winner::Rk => "rk45",
            Winner::Cd => "cd",
        })
    }
}

/// Lower objective wins; equal values (to 1e-12 relative) go to RK.
pub fn pick_winner(p_rk: f64, p_cd: f64) -> Winner {
    if p_cd < p_rk - 1e-12 * p_rk.abs().max(p_cd.abs()) {
        Winner::Cd
    } else {
        Winner::Rk
    }
}

/// `‖aₖ − bₖ‖` for `k = 0..=n`.
pub fn divergence_curve(a: &Trajectory, b: &Trajectory) -> Vec<f64> {
    (0..=a.steps())
        .map(|k| {
            a.state(k)
                .iter()
                .zip(b.state(k))
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct CompareConfig {
    pub integrator: IntegratorOptions,
    pub solve: SolveConfig,
    pub classify: ClassifyConfig,
    /// Skip the RK23 run and the divergence curve.
    pub skip_rk23: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareReport {
    pub p_rk45: f64,
    pub p_rk23: Option<f64>,
    pub p_cd: f64,
    pub verdict: Verdict,
    pub winner: Winner,
    #[serde(skip)]
    pub divergence_curve: Vec<f64>,
    #[serde(skip)]
    pub rk45: Trajectory,
    #[serde(skip)]
    pub rk23: Option<Trajectory>,
    pub cd: SolveReport,
}

pub fn compare(spec: &IvpSpec, cfg: &CompareConfig) -> Result<CompareReport> {
    let grid = spec.grid();
    let out45 = integrate::integrate(spec, RkMethod::Rk45, &cfg.integrator)?;
    let rk45 = integrate::resample(&out45, &grid)?;
    let p_rk45 = discretize::objective(spec, &rk45)?;

    let (rk23, p_rk23, curve) = if cfg.skip_rk23 {
        (None, None, Vec::new())
    } else {
        let out23 = integrate::integrate(spec, RkMethod::Rk23, &cfg.integrator)?;
        let rk23 = integrate::resample(&out23, &grid)?;
        let p = discretize::objective(spec, &rk23)?;
        let curve = divergence_curve(&rk45, &rk23);
        (Some(rk23), Some(p), curve)
    };

    let cd = solver::solve(spec, &cfg.solve, Some(&rk45))?;
    let verdict = classify::classify(&spec.system, &cfg.classify)?;
    Ok(CompareReport {
        p_rk45,
        p_rk23,
        p_cd: cd.objective,
        winner: pick_winner(p_rk45, cd.objective),
        verdict,
        divergence_curve: curve,
        rk45,
        rk23,
        cd,
    })
}
