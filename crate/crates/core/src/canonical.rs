//! Canonical duality machinery for the least-squares objective.
//!
//! With the quadratic measure `Λ` and `Φ(Y, E) = ½ Σ ‖ξₖ + B(Yₖ) + cₖ‖²`,
//! the dual variable is `S = E + B(Y) + C`, and the total complementary
//! function
//!
//! ```text
//! Ξ(Y, S) = tr(Λ(Y)ᵀS) − Φ*(Y, S)
//!         = Σₖ [½ YₖᵀG(σₖ)Yₖ − Yₖᵀt(σₖ) − ½‖σₖ‖² + cₖᵀσₖ] + ψ(σ₁)
//! ```
//!
//! is quadratic and block-separable in `Y` for fixed `S`. Conventions, fixed
//! by requiring both lines above to agree:
//!
//! * `G(σₖ) = δ Σᵢ Sym(Aⁱ)(σₖⁱ + σₖ₊₁ⁱ)`
//! * `t(σₖ) = σₖ − σₖ₊₁ − (δ/2) Dᵀ(σₖ + σₖ₊₁)`
//! * `ψ(σ₁) = Y₀ᵀσ₁ + (δ/2) Σᵢ σ₁ⁱ (Y₀ᵀAⁱY₀ + (DY₀)ᵢ)`
//!
//! with the ghost column `σₙ₊₁ = 0`.

use serde::Serialize;

use crate::discretize::{self, check, Trajectory};
use crate::error::{Error, Result};
use crate::field::Columns;
use crate::linalg::{self, dense, SymMatrix};
use crate::model::IvpSpec;

/// Default certifier tolerance.
pub const DEFAULT_CERT_TOL: f64 = 1e-8;

/// Dual field `S = {σₖ}`, one column per step.
#[derive(Clone, Debug, PartialEq)]
pub struct DualField {
    pub sig: Columns,
}

impl DualField {
    pub fn zeros(spec: &IvpSpec) -> Self {
        Self {
            sig: Columns::zeros(spec.dim(), spec.steps),
        }
    }
}

fn check_dual(spec: &IvpSpec, s: &DualField) -> Result<()> {
    if s.sig.dim() != spec.dim() || s.sig.len() != spec.steps {
        return Err(Error::invalid(format!(
            "dual field is {}×{}, expected {}×{}",
            s.sig.dim(),
            s.sig.len(),
            spec.dim(),
            spec.steps
        )));
    }
    Ok(())
}

/// `S = Λ(Y) + B(Y) + C`, which is the negated residual field.
pub fn dual_map(spec: &IvpSpec, y: &Trajectory) -> Result<DualField> {
    check(spec, y)?;
    Ok(dual_map_unchecked(spec, y))
}

pub(crate) fn dual_map_unchecked(spec: &IvpSpec, y: &Trajectory) -> DualField {
    let mut sig = discretize::residuals_unchecked(spec, y);
    for v in sig.as_mut_slice() {
        *v = -*v;
    }
    DualField { sig }
}

pub fn phi(spec: &IvpSpec, y: &Trajectory, e: &Columns) -> Result<f64> {
    check(spec, y)?;
    if !e.same_shape(&y.cols) {
        return Err(Error::invalid("E must have the trajectory's shape"));
    }
    let mut sum = discretize::b_op(spec, y)?;
    sum.axpy(1.0, e);
    sum.axpy(1.0, &discretize::c_field(spec));
    Ok(0.5 * sum.norm_sq())
}

/// `Φ*(Y, S) = Σ [½‖σₖ‖² − σₖᵀB(Yₖ) − cₖᵀσₖ]`.
pub fn phi_star(spec: &IvpSpec, y: &Trajectory, s: &DualField) -> Result<f64> {
    check(spec, y)?;
    check_dual(spec, s)?;
    let b = discretize::b_op(spec, y)?;
    let c = discretize::c_field(spec);
    Ok(0.5 * s.sig.norm_sq() - s.sig.dot(&b) - s.sig.dot(&c))
}

/// `Ξ(Y, S) = tr(Λ(Y)ᵀS) − Φ*(Y, S)`, from the definition.
pub fn xi_direct(spec: &IvpSpec, y: &Trajectory, s: &DualField) -> Result<f64> {
    let lam = discretize::lambda_op(spec, y)?;
    check_dual(spec, s)?;
    Ok(lam.dot(&s.sig) - phi_star(spec, y, s)?)
}

/// `G`, `t` and the `Y`-free scalar parts of `Ξ` for a fixed dual field.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectedForm {
    pub g: Vec<SymMatrix>,
    pub t: Columns,
    pub psi: f64,
    /// `Σₖ [−½‖σₖ‖² + cₖᵀσₖ]`
    pub sigma_terms: f64,
}

impl CollectedForm {
    /// `Ξ(Y, S)` for this `S`.
    pub fn xi(&self, y: &Trajectory) -> f64 {
        let mut acc = 0.0;
        for (k, g) in self.g.iter().enumerate() {
            let yk = y.cols.col(k);
            let tk = self.t.col(k);
            acc += 0.5 * g.quad_form(yk) - yk.iter().zip(tk).map(|(a, b)| a * b).sum::<f64>();
        }
        acc + self.sigma_terms + self.psi
    }
}

pub fn collect(spec: &IvpSpec, s: &DualField) -> Result<CollectedForm> {
    check_dual(spec, s)?;
    Ok(collect_unchecked(spec, s))
}

pub(crate) fn collect_unchecked(spec: &IvpSpec, s: &DualField) -> CollectedForm {
    let d = spec.dim();
    let n = spec.steps;
    let delta = spec.step();
    let half = 0.5 * delta;
    let slices = spec.system.a_slices();
    let dm = spec.system.linear();
    let zero = vec![0.0; d];

    let mut g = Vec::with_capacity(n);
    let mut t = Columns::zeros(d, n);
    for k in 0..n {
        let cur = s.sig.col(k);
        let next = if k + 1 < n { s.sig.col(k + 1) } else { &zero[..] };
        let sum: Vec<f64> = cur.iter().zip(next).map(|(a, b)| a + b).collect();
        let mut gk = SymMatrix::zeros(d);
        for (ai, si) in slices.iter().zip(&sum) {
            if *si != 0.0 {
                gk.add_scaled(delta * si, ai);
            }
        }
        g.push(gk);
        let dt_sum = dense::matvec_t(dm, &sum, d);
        let tk = t.col_mut(k);
        for i in 0..d {
            tk[i] = cur[i] - next[i] - half * dt_sum[i];
        }
    }

    let c = discretize::c_field(spec);
    let sigma_terms = -0.5 * s.sig.norm_sq() + c.dot(&s.sig);

    let y0 = &spec.y0;
    let s1 = s.sig.col(0);
    let quad = spec.system.quadratic_part(y0);
    let lin = dense::matvec(dm, y0, d);
    let psi = (0..d)
        .map(|i| s1[i] * (y0[i] + half * (quad[i] + lin[i])))
        .sum();

    CollectedForm {
        g,
        t,
        psi,
        sigma_terms,
    }
}

/// `Ξ(Y, S)` through the collected `(G, t, ψ)` representation.
pub fn xi_collected(spec: &IvpSpec, y: &Trajectory, s: &DualField) -> Result<f64> {
    check(spec, y)?;
    Ok(collect(spec, s)?.xi(y))
}

/// `(∇_Y Ξ, ∇_S Ξ)` at `(Y, S)`.
pub fn xi_gradient(spec: &IvpSpec, y: &Trajectory, s: &DualField) -> Result<(Columns, Columns)> {
    check(spec, y)?;
    check_dual(spec, s)?;
    let form = collect_unchecked(spec, s);
    let d = spec.dim();
    let mut gy = Columns::zeros(d, spec.steps);
    for k in 0..spec.steps {
        let gk = form.g[k].matvec(y.cols.col(k));
        let col = gy.col_mut(k);
        for i in 0..d {
            col[i] = gk[i] - form.t.get(i, k);
        }
    }
    let mut gs = dual_map_unchecked(spec, y).sig;
    gs.axpy(-1.0, &s.sig);
    Ok((gy, gs))
}

/// Value of the canonical dual function plus the blocks that needed a
/// pseudoinverse.
#[derive(Clone, Debug, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub singular_blocks: Vec<usize>,
}

/// `Π^d(S) = Σ [−½ tₖᵀG(σₖ)⁺tₖ − ½‖σₖ‖² + cₖᵀσₖ] + ψ(σ₁)`.
pub fn dual_function(spec: &IvpSpec, s: &DualField, rank_tol: f64) -> Result<DualValue> {
    check_dual(spec, s)?;
    let form = collect_unchecked(spec, s);
    let mut value = 0.0;
    let mut singular_blocks = Vec::new();
    for (k, g) in form.g.iter().enumerate() {
        let (ginv, truncated) = linalg::pinv_with_rank(g, rank_tol)?;
        if truncated {
            singular_blocks.push(k);
        }
        value -= 0.5 * ginv.quad_form(form.t.col(k));
    }
    Ok(DualValue {
        value: value + form.sigma_terms + form.psi,
        singular_blocks,
    })
}

/// Primal trajectory recovered from a dual field.
#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub trajectory: Trajectory,
    pub pinv_blocks: Vec<usize>,
}

/// `Yₖ = G(σₖ)⁺ t(σₖ)`.
pub fn recover(spec: &IvpSpec, s: &DualField, rank_tol: f64) -> Result<Recovery> {
    check_dual(spec, s)?;
    let form = collect_unchecked(spec, s);
    let mut traj = Trajectory::zeros(spec);
    let mut pinv_blocks = Vec::new();
    for (k, g) in form.g.iter().enumerate() {
        let (ginv, truncated) = linalg::pinv_with_rank(g, rank_tol)?;
        if truncated {
            pinv_blocks.push(k);
        }
        let yk = ginv.matvec(form.t.col(k));
        traj.cols.col_mut(k).copy_from_slice(&yk);
    }
    Ok(Recovery {
        trajectory: traj,
        pinv_blocks,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertVerdict {
    /// Every `G(σₖ) ⪰ 0`: the primal point is a global minimizer.
    GlobalMinimum,
    /// Every `G(σₖ) ≼ 0`: a local extremum in the double-max/double-min sense.
    LocalClass,
    Uncertified,
}

impl std::fmt::Display for CertVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CertVerdict::GlobalMinimum => "global-minimum",
            CertVerdict::LocalClass => "local-class",
            CertVerdict::Uncertified => "uncertified",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialityCertificate {
    pub verdict: CertVerdict,
    pub min_eig: f64,
    pub max_eig: f64,
    pub gap: f64,
    pub gap_ok: bool,
    pub grad_norm: f64,
    pub singular_blocks: Vec<usize>,
}

impl TrialityCertificate {
    /// `key = value` text form.
    pub fn to_text(&self) -> String {
        format!(
            "verdict = \"{}\"\nmin_eig = {:e}\nmax_eig = {:e}\ngap = {:e}\nsingular_blocks = {:?}\n",
            self.verdict, self.min_eig, self.max_eig, self.gap, self.singular_blocks
        )
    }
}

/// Classifies a critical pair `(Y, S)` of `Ξ` by the definiteness of the
/// `G(σₖ)` blocks, and records the duality gap `|P(Y) − Π^d(S)|`.
pub fn certify(spec: &IvpSpec, s: &DualField, y: &Trajectory, tol: f64) -> Result<TrialityCertificate> {
    let (gy, gs) = xi_gradient(spec, y, s)?;
    let grad_norm = (gy.norm_sq() + gs.norm_sq()).sqrt();
    if !(grad_norm <= tol) {
        return Err(Error::NotCritical { grad_norm, tol });
    }
    let form = collect_unchecked(spec, s);
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    for g in &form.g {
        let e = linalg::eigh(g)?;
        min_eig = min_eig.min(e.eigenvalues[0]);
        max_eig = max_eig.max(*e.eigenvalues.last().unwrap());
    }
    let primal = discretize::objective(spec, y)?;
    let dual = dual_function(spec, s, linalg::DEFAULT_RANK_TOL)?;
    let gap = (primal - dual.value).abs();
    let gap_ok = gap <= tol * primal.abs().max(1.0);
    let verdict = if min_eig >= -tol && gap_ok {
        CertVerdict::GlobalMinimum
    } else if max_eig <= tol {
        CertVerdict::LocalClass
    } else {
        CertVerdict::Uncertified
    };
    Ok(TrialityCertificate {
        verdict,
        min_eig,
        max_eig,
        gap,
        gap_ok,
        grad_norm,
        singular_blocks: dual.singular_blocks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DEFAULT_RANK_TOL;
    use crate::model::{registry, Params};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec(name: &str, n: usize) -> IvpSpec {
        let mut p = Params::new();
        p.insert("n".into(), n as f64);
        p.insert("T".into(), n as f64 * 0.01);
        registry(name, &p).unwrap()
    }

    fn rand_cols(rng: &mut ChaCha8Rng, spec: &IvpSpec, scale: f64) -> Columns {
        Columns::from_fn(spec.dim(), spec.steps, |_, _| rng.random_range(-scale..scale))
    }

    /// Double-well fixture: logistic r=4, δ=0.5, y0=1.2, n=1 gives
    /// P(y) = ½(y² − 0.96)².
    fn double_well() -> IvpSpec {
        let mut p = Params::new();
        p.insert("r".into(), 4.0);
        p.insert("y0".into(), 1.2);
        p.insert("T".into(), 0.5);
        p.insert("n".into(), 1.0);
        registry("logistic", &p).unwrap()
    }

    fn scalar_traj(spec: &IvpSpec, v: f64) -> Trajectory {
        Trajectory::new(spec, Columns::from_vec(1, 1, vec![v]).unwrap()).unwrap()
    }

    #[test]
    fn dual_map_is_lambda_plus_b_plus_c() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = spec("lorenz", 15);
        let y = Trajectory::new(&spec, rand_cols(&mut rng, &spec, 5.0)).unwrap();
        let s = dual_map(&spec, &y).unwrap();
        let mut sum = discretize::lambda_op(&spec, &y).unwrap();
        sum.axpy(1.0, &discretize::b_op(&spec, &y).unwrap());
        sum.axpy(1.0, &discretize::c_field(&spec));
        for (a, b) in s.sig.as_slice().iter().zip(sum.as_slice()) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0) * 10.0);
        }
        assert_abs_diff_eq!(
            0.5 * s.sig.norm_sq(),
            discretize::objective(&spec, &y).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn equilibrium_dual_is_zero() {
        let mut p = Params::new();
        p.insert("y0".into(), 1.0);
        let spec = registry("logistic", &p).unwrap();
        let s = dual_map(&spec, &Trajectory::constant(&spec)).unwrap();
        assert_eq!(s.sig.max_abs(), 0.0);
    }

    #[test]
    fn phi_at_lambda_is_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = spec("memristor", 10);
        let y = Trajectory::new(&spec, rand_cols(&mut rng, &spec, 2.0)).unwrap();
        let lam = discretize::lambda_op(&spec, &y).unwrap();
        let p = discretize::objective(&spec, &y).unwrap();
        assert!((phi(&spec, &y, &lam).unwrap() - p).abs() <= 1e-12 * p.max(1.0));
        assert_eq!(phi_star(&spec, &y, &DualField::zeros(&spec)).unwrap(), 0.0);
        assert_eq!(xi_direct(&spec, &y, &DualField::zeros(&spec)).unwrap(), 0.0);
    }

    #[test]
    fn xi_is_quadratic_in_s() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = spec("lorenz", 8);
        let y = Trajectory::new(&spec, rand_cols(&mut rng, &spec, 3.0)).unwrap();
        let s = DualField {
            sig: rand_cols(&mut rng, &spec, 1.0),
        };
        let s2 = DualField { sig: s.sig.scaled(2.0) };
        let lhs = xi_direct(&spec, &y, &s2).unwrap() - 2.0 * xi_direct(&spec, &y, &s).unwrap();
        assert_abs_diff_eq!(lhs, -s.sig.norm_sq(), epsilon = 1e-10);
    }

    #[test]
    fn lorenz_g_pattern() {
        let spec = spec("lorenz", 3);
        let mut sig = Columns::zeros(3, 3);
        sig.col_mut(0).copy_from_slice(&[1.0, 2.0, 3.0]);
        let form = collect(&spec, &DualField { sig }).unwrap();
        let g = &form.g[0];
        let delta = spec.step();
        for i in 0..3 {
            assert_eq!(g.get(i, i), 0.0);
        }
        assert_abs_diff_eq!(g.get(0, 1), delta * 0.5 * 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.get(0, 2), -delta * 0.5 * 2.0, epsilon = 1e-15);
        assert_eq!(g.get(1, 2), 0.0);
        // σ₂ = 0 and the ghost σ₄ = 0 give zero blocks further on
        assert_eq!(form.g[1].max_abs(), 0.0);
    }

    #[test]
    fn logistic_g_is_scaled_sigma_sum() {
        let spec = spec("logistic", 4);
        let sig = Columns::from_vec(1, 4, vec![0.3, -0.1, 0.7, 0.2]).unwrap();
        let form = collect(&spec, &DualField { sig: sig.clone() }).unwrap();
        let delta = spec.step();
        for k in 0..4 {
            let next = if k < 3 { sig.get(0, k + 1) } else { 0.0 };
            assert_abs_diff_eq!(form.g[k].get(0, 0), -5.0 * delta * (sig.get(0, k) + next), epsilon = 1e-15);
        }
        // positive definiteness is reachable by flipping the dual sign
        let neg = collect(&spec, &DualField { sig: Columns::from_vec(1, 4, vec![-1.0; 4]).unwrap() }).unwrap();
        assert!(neg.g.iter().all(|g| g.get(0, 0) > 0.0));
    }

    #[test]
    fn zero_dual_gives_zero_dual_value() {
        let spec = spec("memristor", 6);
        let v = dual_function(&spec, &DualField::zeros(&spec), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.singular_blocks.len(), 6);
        let rec = recover(&spec, &DualField::zeros(&spec), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(rec.trajectory.cols.max_abs(), 0.0);
    }

    #[test]
    fn double_well_critical_points() {
        let spec = double_well();
        let root = 0.96f64.sqrt();
        // both minimizers: σ = 0, Π = Ξ = Π^d = 0, certified global
        for y in [root, -root] {
            let y = scalar_traj(&spec, y);
            let s = dual_map(&spec, &y).unwrap();
            assert!(s.sig.max_abs() < 1e-15);
            let cert = certify(&spec, &s, &y, 1e-8).unwrap();
            assert_eq!(cert.verdict, CertVerdict::GlobalMinimum);
            assert!(cert.gap < 1e-12);
        }
        // local maximizer y = 0: σ = 0.96, G = −1.92 → negative class
        let y = scalar_traj(&spec, 0.0);
        let s = dual_map(&spec, &y).unwrap();
        assert_abs_diff_eq!(s.sig.get(0, 0), 0.96, epsilon = 1e-15);
        let cert = certify(&spec, &s, &y, 1e-8).unwrap();
        assert_eq!(cert.verdict, CertVerdict::LocalClass);
        assert_abs_diff_eq!(cert.max_eig, -1.92, epsilon = 1e-14);
        let pd = dual_function(&spec, &s, DEFAULT_RANK_TOL).unwrap().value;
        assert_abs_diff_eq!(pd, 0.4608, epsilon = 1e-14);
        assert_abs_diff_eq!(discretize::objective(&spec, &y).unwrap(), 0.4608, epsilon = 1e-14);
    }

    #[test]
    fn double_well_dual_critical_point() {
        // n = 1: G = −2σ and t = 0, so Π^d(σ) = −½σ² + cσ + ψ(σ) is a
        // concave quadratic whose maximizer is the σ of the local max y = 0.
        let spec = double_well();
        let at = |v: f64| {
            let s = DualField { sig: Columns::from_vec(1, 1, vec![v]).unwrap() };
            dual_function(&spec, &s, DEFAULT_RANK_TOL).unwrap().value
        };
        let h = 1e-5;
        let slope = (at(0.96 + h) - at(0.96 - h)) / (2.0 * h);
        assert!(slope.abs() < 1e-8, "{slope}");
        let s = DualField { sig: Columns::from_vec(1, 1, vec![0.96]).unwrap() };
        let rec = recover(&spec, &s, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(rec.trajectory.cols.get(0, 0), 0.0);
        assert!(rec.pinv_blocks.is_empty());
    }

    #[test]
    fn collected_matches_direct_and_recovery_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for name in crate::model::SYSTEM_NAMES {
            let spec = spec(name, 12);
            for _ in 0..20 {
                let y = Trajectory::new(&spec, rand_cols(&mut rng, &spec, 3.0)).unwrap();
                let s = DualField { sig: rand_cols(&mut rng, &spec, 2.0) };
                let a = xi_direct(&spec, &y, &s).unwrap();
                let b = xi_collected(&spec, &y, &s).unwrap();
                assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0), "{name}: {a} vs {b}");
                let p = discretize::objective(&spec, &y).unwrap();
                let xi = xi_direct(&spec, &y, &dual_map(&spec, &y).unwrap()).unwrap();
                assert!((xi - p).abs() <= 1e-10 * p.max(1.0));
            }
        }
        // logistic blocks are nonsingular for σ of one sign
        let spec = spec("logistic", 12);
        let s = DualField {
            sig: Columns::from_fn(1, 12, |_, _| -rng.random_range(0.5..2.0)),
        };
        let rec = recover(&spec, &s, DEFAULT_RANK_TOL).unwrap();
        assert!(rec.pinv_blocks.is_empty());
        let (gy, _) = xi_gradient(&spec, &rec.trajectory, &s).unwrap();
        assert!(gy.max_abs() < 1e-8);
        let pd = dual_function(&spec, &s, DEFAULT_RANK_TOL).unwrap().value;
        let xi = xi_collected(&spec, &rec.trajectory, &s).unwrap();
        assert!((pd - xi).abs() <= 1e-10 * pd.abs().max(1.0));
    }

    #[test]
    fn not_critical_is_reported() {
        let spec = double_well();
        let y = scalar_traj(&spec, 0.5);
        let s = dual_map(&spec, &y).unwrap();
        assert!(matches!(certify(&spec, &s, &y, 1e-8), Err(Error::NotCritical { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let spec = spec("lorenz", 4);
        let bad = DualField {
            sig: Columns::zeros(3, 5),
        };
        assert!(collect(&spec, &bad).is_err());
        assert!(dual_function(&spec, &bad, DEFAULT_RANK_TOL).is_err());
    }
}
