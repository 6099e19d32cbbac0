use std::collections::BTreeMap;

use super::{Forcing, IvpSpec, QuadraticSystem, Sinusoid};
use crate::error::{Error, Result};

/// Named numeric overrides, e.g. `r = 4` or `T = 50`.
pub type Params = BTreeMap<String, f64>;

pub const SYSTEM_NAMES: [&str; 3] = ["logistic", "memristor", "lorenz"];

struct Lookup<'a> {
    system: &'static str,
    params: &'a Params,
    allowed: &'static [&'static str],
}

impl Lookup<'_> {
    fn check(&self) -> Result<()> {
        match self.params.keys().find(|k| !self.allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::invalid(format!(
                "unknown parameter `{k}` for {} (expected one of {})",
                self.system,
                self.allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn steps(&self, default: usize) -> Result<usize> {
        match self.params.get("n") {
            None => Ok(default),
            Some(&v) if v >= 1.0 && v.fract() == 0.0 && v < 1e9 => Ok(v as usize),
            Some(v) => Err(Error::invalid(format!("n must be a positive integer, got {v}"))),
        }
    }
}

/// Builds one of the built-in benchmark problems.
///
/// * `logistic`: `y' = r y (1 - y)`; defaults r=5, y0=0.1, T=2, n=1000.
/// * `memristor`: `x' = a(i² - 1)`, `i' = -(x + μ) i + β cos ωt`;
///   defaults a=1, mu=0, beta=0.7, omega=1, (x0, i0)=(0.1, 0.1), T=100, n=1000.
/// * `lorenz`: standard parameters sigma=10, rho=28, beta=8/3,
///   (x0, y0, z0)=(10, 12, 14), T=10, n=10000.
pub fn registry(name: &str, params: &Params) -> Result<IvpSpec> {
    match name {
        "logistic" => {
            let p = Lookup {
                system: "logistic",
                params,
                allowed: &["r", "y0", "T", "n"],
            };
            p.check()?;
            let r = p.get("r", 5.0);
            let sys = QuadraticSystem::new("logistic", vec![vec![-r]], vec![r], Forcing::zero(1))?;
            IvpSpec::new(sys, vec![p.get("y0", 0.1)], p.get("T", 2.0), p.steps(1000)?)
        }
        "memristor" => {
            let p = Lookup {
                system: "memristor",
                params,
                allowed: &["a", "mu", "beta", "omega", "x0", "i0", "T", "n"],
            };
            p.check()?;
            let a = p.get("a", 1.0);
            let mu = p.get("mu", 0.0);
            let beta = p.get("beta", 0.7);
            let omega = p.get("omega", 1.0);
            let slices = vec![vec![0.0, 0.0, 0.0, a], vec![0.0, -0.5, -0.5, 0.0]];
            let forcing = Forcing {
                constant: vec![-a, 0.0],
                terms: vec![Sinusoid {
                    component: 1,
                    amplitude: beta,
                    omega,
                    phase: 0.0,
                }],
            };
            let sys = QuadraticSystem::new("memristor", slices, vec![0.0, 0.0, 0.0, -mu], forcing)?;
            IvpSpec::new(
                sys,
                vec![p.get("x0", 0.1), p.get("i0", 0.1)],
                p.get("T", 100.0),
                p.steps(1000)?,
            )
        }
        "lorenz" => {
            let p = Lookup {
                system: "lorenz",
                params,
                allowed: &["sigma", "rho", "beta", "x0", "y0", "z0", "T", "n"],
            };
            p.check()?;
            let sigma = p.get("sigma", 10.0);
            let rho = p.get("rho", 28.0);
            let beta = p.get("beta", 8.0 / 3.0);
            let mut a2 = vec![0.0; 9];
            a2[2] = -0.5;
            a2[6] = -0.5;
            let mut a3 = vec![0.0; 9];
            a3[1] = 0.5;
            a3[3] = 0.5;
            let d = vec![-sigma, sigma, 0.0, rho, -1.0, 0.0, 0.0, 0.0, -beta];
            let sys = QuadraticSystem::new("lorenz", vec![vec![0.0; 9], a2, a3], d, Forcing::zero(3))?;
            IvpSpec::new(
                sys,
                vec![p.get("x0", 10.0), p.get("y0", 12.0), p.get("z0", 14.0)],
                p.get("T", 10.0),
                p.steps(10_000)?,
            )
        }
        other => Err(Error::UnknownSystem(other.to_string())),
    }
}
