use crate::discretize::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::dense;
use crate::model::IvpSpec;

/// Solves `y − y_prev − (δ/2)(F(tₖ, y) + F(tₖ₋₁, y_prev)) = 0` for one step.
///
/// Starts from the modified Euler predictor, runs plain fixed-point
/// iteration while it contracts and switches to Newton when it stalls.
pub fn step_fixed_point(spec: &IvpSpec, k: usize, y_prev: &[f64], tol: f64, max_it: usize) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tolerance must be positive"));
    }
    if k == 0 || k > spec.steps {
        return Err(Error::invalid(format!("step index {k} outside 1..={}", spec.steps)));
    }
    let d = spec.dim();
    if y_prev.len() != d {
        return Err(Error::invalid("previous state has the wrong dimension"));
    }
    let sys = &spec.system;
    let grid = spec.grid();
    let (t0, t1) = (grid.node(k - 1), grid.node(k));
    let half = 0.5 * grid.step();

    let mut f_prev = vec![0.0; d];
    sys.eval_into(t0, y_prev, &mut f_prev);
    let base: Vec<f64> = (0..d).map(|i| y_prev[i] + half * f_prev[i]).collect();

    let mut y: Vec<f64> = (0..d).map(|i| y_prev[i] + 2.0 * half * f_prev[i]).collect();
    let mut f = vec![0.0; d];
    let residual = |y: &[f64], f: &mut [f64]| -> Vec<f64> {
        sys.eval_into(t1, y, f);
        (0..d).map(|i| y[i] - base[i] - half * f[i]).collect()
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut res = residual(&y, &mut f);
    let mut res_norm = norm(&res);
    let mut newton = false;
    let mut jac = vec![0.0; d * d];
    for _ in 0..max_it {
        if res_norm <= tol {
            return Ok(y);
        }
        if newton {
            sys.jacobian_into(&y, &mut jac);
            let mut m: Vec<f64> = jac.iter().map(|j| -half * j).collect();
            for i in 0..d {
                m[i * d + i] += 1.0;
            }
            let Some(step) = dense::solve_lu(&m, d, &res) else { break };
            for i in 0..d {
                y[i] -= step[i];
            }
        } else {
            for i in 0..d {
                y[i] -= res[i];
            }
        }
        let new = residual(&y, &mut f);
        let new_norm = norm(&new);
        if !new_norm.is_finite() {
            break;
        }
        if !newton && new_norm > 0.5 * res_norm {
            newton = true;
        }
        res = new;
        res_norm = new_norm;
    }
    if res_norm <= tol {
        return Ok(y);
    }
    Err(Error::NonConvergence {
        iterations: max_it,
        residual: res_norm,
    })
}

/// Marches the implicit trapezoidal rule across the grid; every residual
/// column satisfies `‖rₖ‖ ≤ tol`, so `P(Y) ≤ ½ n tol²`.
pub fn trapezoidal_march(spec: &IvpSpec, tol: f64, max_it: usize) -> Result<Trajectory> {
    let mut traj = Trajectory::zeros(spec);
    let mut prev = spec.y0.clone();
    for k in 1..=spec.steps {
        let y = step_fixed_point(spec, k, &prev, tol, max_it)?;
        traj.cols.col_mut(k - 1).copy_from_slice(&y);
        prev = y;
    }
    Ok(traj)
}
