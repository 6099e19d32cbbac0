//! Shared inputs for the criterion benchmarks in `benches/`.

use dualtraj::{integrate, registry, IvpSpec, Params, Trajectory};

/// A built-in problem on an `n`-step grid.
pub fn problem(name: &str, n: usize) -> IvpSpec {
    let mut p = Params::new();
    p.insert("n".into(), n as f64);
    registry(name, &p).expect("built-in system")
}

/// RK45 solution sampled on the problem grid, a realistic solver start.
pub fn rk45_start(spec: &IvpSpec) -> Trajectory {
    let out = integrate::rk45(spec, integrate::DEFAULT_RTOL, integrate::DEFAULT_ATOL).expect("integrates");
    integrate::resample(&out, &spec.grid()).expect("resamples")
}
