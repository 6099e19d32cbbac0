//! Spectral classification of the static pencil `s ↦ Σᵢ sᵢ Sym(Aⁱ)`.
//!
//! Every dual block `G(σₖ)` is `δ` times the pencil evaluated at
//! `s = σₖ + σₖ₊₁`, so whether positive (semi)definite blocks exist at all is
//! a property of the pencil alone. Three outcomes:
//!
//! * `PdAttainable`: some `s` gives a positive definite pencil.
//! * `BoundaryOnly`: nothing is PD, but a nonzero PSD pencil exists.
//! * `IndefiniteOnly`: the only PSD member is the zero matrix.
//!
//! `mu_star = max_{‖s‖=1} λ_min(pencil(s))` decides the first case. The
//! other two are told apart by the scale-free margin
//! `nu_star = max λ_min(pencil(s)) / ‖pencil(s)‖_F` over `s` with a nonzero
//! pencil, which is `0` for a nonzero PSD witness and strictly negative when
//! every nonzero member is indefinite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eigh, SymMatrix};
use crate::model::QuadraticSystem;

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-9;
pub const DEFAULT_BUDGET: usize = 100_000;

const CHUNK: usize = 1024;
const REFINE_STARTS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyConfig {
    pub tol: f64,
    pub budget: usize,
    pub seed: u64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tol: DEFAULT_CLASSIFY_TOL,
            budget: DEFAULT_BUDGET,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerdictKind {
    PdAttainable,
    BoundaryOnly,
    IndefiniteOnly,
}

impl VerdictKind {
    pub fn prognosis(self) -> &'static str {
        match self {
            VerdictKind::PdAttainable => "stable; iteration methods shouldn't produce chaos",
            VerdictKind::BoundaryOnly => {
                "deterministically stable; iterative methods may produce pseudo-chaos"
            }
            VerdictKind::IndefiniteOnly => "NP-hard per Conjecture 1; chaotic per Conjecture 2",
        }
    }
}

impl std::fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            VerdictKind::PdAttainable => "pd-attainable",
            VerdictKind::BoundaryOnly => "boundary-only",
            VerdictKind::IndefiniteOnly => "indefinite-only",
        })
    }
}

/// One sampled direction and the pencil spectrum there.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EigSample {
    pub s: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub mu_star: f64,
    pub nu_star: f64,
    pub witness_s: Vec<f64>,
    pub structural_zero: bool,
    pub caveat: Option<String>,
    #[serde(skip)]
    pub evidence: Vec<EigSample>,
}

pub fn verdict_to_prognosis(v: &Verdict) -> &'static str {
    v.kind.prognosis()
}

pub fn pencil(sys: &QuadraticSystem, s: &[f64]) -> Result<SymMatrix> {
    let d = sys.dim();
    if s.len() != d {
        return Err(Error::invalid(format!("s has {} entries, expected {d}", s.len())));
    }
    Ok(pencil_unchecked(sys, s))
}

fn pencil_unchecked(sys: &QuadraticSystem, s: &[f64]) -> SymMatrix {
    let mut m = SymMatrix::zeros(sys.dim());
    for (a, &si) in sys.a_slices().iter().zip(s) {
        if si != 0.0 {
            m.add_scaled(si, a);
        }
    }
    m
}

/// True when some diagonal position is zero in every slice while its row has
/// a nonzero off-diagonal entry in some slice; no pencil member is then PD.
pub fn pd_structurally_impossible(sys: &QuadraticSystem) -> bool {
    let d = sys.dim();
    let a = sys.a_slices();
    (0..d).any(|j| {
        let diag_zero = a.iter().all(|m| m.get(j, j) == 0.0);
        let off = a.iter().any(|m| (0..d).any(|l| l != j && m.get(j, l) != 0.0));
        diag_zero && off
    })
}

struct Score {
    lmin: f64,
    ratio: f64,
}

fn score(sys: &QuadraticSystem, s: &[f64], tol: f64) -> (Score, Vec<f64>) {
    let m = pencil_unchecked(sys, s);
    // entries are finite by construction of the system
    let eig = eigh(&m).expect("finite pencil").eigenvalues;
    let fro = m.frobenius_norm();
    let lmin = eig[0];
    let ratio = if fro > tol { lmin / fro } else { f64::NEG_INFINITY };
    (Score { lmin, ratio }, eig)
}

fn normalize(v: &mut [f64]) -> bool {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

/// Coordinate ascent on the unit sphere with step halving.
fn refine(sys: &QuadraticSystem, start: &[f64], tol: f64, f: impl Fn(&Score) -> f64) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut best = start.to_vec();
    let mut best_val = f(&score(sys, &best, tol).0);
    let mut h = 0.25;
    while h > 1e-12 {
        let mut improved = false;
        for j in 0..d {
            for sign in [1.0, -1.0] {
                let mut cand = best.clone();
                cand[j] += sign * h;
                if !normalize(&mut cand) {
                    continue;
                }
                let v = f(&score(sys, &cand, tol).0);
                if v > best_val {
                    best = cand;
                    best_val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    (best, best_val)
}

fn top_starts(points: &[Vec<f64>], values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).filter(|&i| values[i].is_finite()).collect();
    // stable sort keeps index order among ties, so the result is deterministic
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    idx.truncate(REFINE_STARTS);
    idx
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|b| *v > values[b]) {
            best = Some(i);
        }
    }
    best
}

fn classify_scalar(sys: &QuadraticSystem) -> Verdict {
    let a = sys.a_slices()[0].get(0, 0);
    if a != 0.0 {
        let s = a.signum();
        Verdict {
            kind: VerdictKind::PdAttainable,
            mu_star: a.abs(),
            nu_star: 1.0,
            witness_s: vec![s],
            structural_zero: false,
            caveat: None,
            evidence: vec![
                EigSample { s: vec![1.0], eigenvalues: vec![a] },
                EigSample { s: vec![-1.0], eigenvalues: vec![-a] },
            ],
        }
    } else {
        Verdict {
            kind: VerdictKind::BoundaryOnly,
            mu_star: 0.0,
            nu_star: 0.0,
            witness_s: vec![1.0],
            structural_zero: false,
            caveat: Some("the pencil is identically zero (linear system)".into()),
            evidence: vec![EigSample { s: vec![1.0], eigenvalues: vec![0.0] }],
        }
    }
}

pub fn classify(sys: &QuadraticSystem, cfg: &ClassifyConfig) -> Result<Verdict> {
    if !(cfg.tol > 0.0) {
        return Err(Error::invalid("classification tolerance must be positive"));
    }
    let d = sys.dim();
    if d == 1 {
        return Ok(classify_scalar(sys));
    }
    let tol = cfg.tol;

    // ±coordinate axes first, then seeded Gaussian directions. Each chunk has
    // its own stream so the sample set does not depend on the thread count.
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(2 * d + cfg.budget);
    for j in 0..d {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; d];
            e[j] = sign;
            points.push(e);
        }
    }
    let chunks = cfg.budget.div_ceil(CHUNK);
    let sampled: Vec<Vec<Vec<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(cfg.budget - c * CHUNK);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                if normalize(&mut v) {
                    out.push(v);
                }
            }
            out
        })
        .collect();
    points.extend(sampled.into_iter().flatten());

    let scored: Vec<(Score, Vec<f64>)> = points.par_iter().map(|s| score(sys, s, tol)).collect();
    let lmins: Vec<f64> = scored.iter().map(|(s, _)| s.lmin).collect();
    let ratios: Vec<f64> = scored.iter().map(|(s, _)| s.ratio).collect();

    let mut mu_star = f64::NEG_INFINITY;
    let mut mu_witness = points[0].clone();
    for i in top_starts(&points, &lmins) {
        let (s, v) = refine(sys, &points[i], tol, |sc| sc.lmin);
        if v > mu_star {
            mu_star = v;
            mu_witness = s;
        }
    }

    let mut nu_star = f64::NEG_INFINITY;
    let mut nu_witness = None;
    if argmax(&ratios).is_some() {
        for i in top_starts(&points, &ratios) {
            let (s, v) = refine(sys, &points[i], tol, |sc| sc.ratio);
            if v > nu_star {
                nu_star = v;
                nu_witness = Some(s);
            }
        }
    }

    let structural_zero = pd_structurally_impossible(sys);
    let (kind, witness_s) = if mu_star > tol && !structural_zero {
        (VerdictKind::PdAttainable, mu_witness)
    } else if nu_star >= -tol {
        (VerdictKind::BoundaryOnly, nu_witness.unwrap_or(mu_witness))
    } else {
        (VerdictKind::IndefiniteOnly, mu_witness)
    };

    let evidence = points
        .into_iter()
        .zip(scored)
        .map(|(s, (_, eigenvalues))| EigSample { s, eigenvalues })
        .collect();

    Ok(Verdict {
        kind,
        mu_star,
        nu_star,
        witness_s,
        structural_zero,
        caveat: None,
        evidence,
    })
}
