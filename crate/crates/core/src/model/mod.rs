//! Quadratic ODE systems `Y' = F(t, Y)` with
//! `Fᵢ(t, y) = yᵀAⁱy + (Dy)ᵢ + gᵢ(t)`, and the built-in benchmark systems.

mod file;
mod registry;

pub use file::{parse_system_file, serialize_system};
pub use registry::{registry, Params, SYSTEM_NAMES};

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

pub const MAX_DIM: usize = 8;

/// One `amplitude · cos(omega · t + phase)` term acting on `component`.
#[derive(Clone, Debug, PartialEq)]
pub struct Sinusoid {
    pub component: usize,
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
}

/// The forcing `g(t)`: a constant vector plus a sum of cosines.
#[derive(Clone, Debug, PartialEq)]
pub struct Forcing {
    pub constant: Vec<f64>,
    pub terms: Vec<Sinusoid>,
}

impl Forcing {
    pub fn zero(d: usize) -> Self {
        Self {
            constant: vec![0.0; d],
            terms: Vec::new(),
        }
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.constant);
        for s in &self.terms {
            out[s.component] += s.amplitude * (s.omega * t + s.phase).cos();
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.constant.len()];
        self.eval_into(t, &mut out);
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSystem {
    name: String,
    a: Vec<SymMatrix>,
    /// Row-major `d × d` linear part.
    d_mat: Vec<f64>,
    forcing: Forcing,
}

impl QuadraticSystem {
    /// `a[i]` is the (possibly non-symmetric) slice for component `i`; only
    /// its symmetric part is kept.
    pub fn new(
        name: impl Into<String>,
        a: Vec<Vec<f64>>,
        d_mat: Vec<f64>,
        forcing: Forcing,
    ) -> Result<Self> {
        let d = a.len();
        if d == 0 || d > MAX_DIM {
            return Err(Error::invalid(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        let a = a
            .into_iter()
            .enumerate()
            .map(|(i, slice)| {
                if slice.len() != d * d {
                    return Err(Error::invalid(format!(
                        "A.{} has {} entries, expected {}",
                        i + 1,
                        slice.len(),
                        d * d
                    )));
                }
                SymMatrix::new(d, slice)
            })
            .collect::<Result<Vec<_>>>()?;
        if d_mat.len() != d * d {
            return Err(Error::invalid(format!(
                "D has {} entries, expected {}",
                d_mat.len(),
                d * d
            )));
        }
        if forcing.constant.len() != d {
            return Err(Error::invalid(format!(
                "forcing constant has {} entries, expected {d}",
                forcing.constant.len()
            )));
        }
        if let Some(s) = forcing.terms.iter().find(|s| s.component >= d) {
            return Err(Error::invalid(format!(
                "forcing term targets component {} of a {d}-dimensional system",
                s.component + 1
            )));
        }
        let finite = a.iter().all(SymMatrix::is_finite)
            && d_mat.iter().all(|v| v.is_finite())
            && forcing.constant.iter().all(|v| v.is_finite())
            && forcing
                .terms
                .iter()
                .all(|s| s.amplitude.is_finite() && s.omega.is_finite() && s.phase.is_finite());
        if !finite {
            return Err(Error::invalid("system coefficients must be finite"));
        }
        Ok(Self {
            name: name.into(),
            a,
            d_mat,
            forcing,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Symmetrized quadratic slices `Sym(Aⁱ)`.
    pub fn a_slices(&self) -> &[SymMatrix] {
        &self.a
    }

    pub fn linear(&self) -> &[f64] {
        &self.d_mat
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn eval_field(&self, t: f64, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::invalid(format!(
                "state has {} components, system has {}",
                y.len(),
                self.dim()
            )));
        }
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, y, &mut out);
        Ok(out)
    }

    /// Unchecked `F(t, y)` into `out`.
    #[inline]
    pub fn eval_into(&self, t: f64, y: &[f64], out: &mut [f64]) {
        self.forcing.eval_into(t, out);
        self.add_state_part(y, out);
    }

    /// Adds `yᵀAⁱy + (Dy)ᵢ` to `out`.
    #[inline]
    pub fn add_state_part(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            let row = &self.d_mat[i * d..(i + 1) * d];
            out[i] += self.a[i].quad_form(y) + row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// State-dependent part `yᵀAⁱy` only.
    pub fn quadratic_part(&self, y: &[f64]) -> Vec<f64> {
        self.a.iter().map(|ai| ai.quad_form(y)).collect()
    }

    /// Row-major `∂F/∂y = 2 Aⁱ y (rows) + D`.
    pub fn jacobian_into(&self, y: &[f64], out: &mut [f64]) {
        let d = self.dim();
        out.copy_from_slice(&self.d_mat);
        for i in 0..d {
            let ay = self.a[i].matvec(y);
            for j in 0..d {
                out[i * d + j] += 2.0 * ay[j];
            }
        }
    }

    pub fn jacobian(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim() * self.dim()];
        self.jacobian_into(y, &mut out);
        out
    }
}

/// Uniform time grid `t_k = k·T/n`, `k = 0..=n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub horizon: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("horizon T must be positive"));
        }
        if steps == 0 {
            return Err(Error::invalid("step count n must be at least 1"));
        }
        Ok(Self { horizon, steps })
    }

    #[inline]
    pub fn step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    #[inline]
    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            k as f64 * self.step()
        }
    }
}

/// An initial-value problem on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct IvpSpec {
    pub system: QuadraticSystem,
    pub y0: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
}

impl IvpSpec {
    pub fn new(system: QuadraticSystem, y0: Vec<f64>, horizon: f64, steps: usize) -> Result<Self> {
        if y0.len() != system.dim() {
            return Err(Error::invalid(format!(
                "y0 has {} components, system has {}",
                y0.len(),
                system.dim()
            )));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("y0 must be finite"));
        }
        Grid::new(horizon, steps)?;
        Ok(Self {
            system,
            y0,
            horizon,
            steps,
        })
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn grid(&self) -> Grid {
        Grid {
            horizon: self.horizon,
            steps: self.steps,
        }
    }

    pub fn step(&self) -> f64 {
        self.grid().step()
    }

    /// Same system and initial state on a different grid.
    pub fn with_grid(&self, horizon: f64, steps: usize) -> Result<Self> {
        Self::new(self.system.clone(), self.y0.clone(), horizon, steps)
    }
}
