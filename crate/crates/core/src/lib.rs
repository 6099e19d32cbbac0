//! Global-optimal discrete trajectories for initial-value problems with
//! quadratic nonlinearities.
//!
//! The trapezoidal rule turns `y' = F(t, y)` into the least-squares problem
//! `min P(Y)`; canonical duality gives a dual problem, a primal–dual solver
//! and a certificate for global optimality. The crate also carries adaptive
//! Runge–Kutta baselines and a spectral classifier for the dual pencil.
//!
//! ```
//! use dualtraj::{registry, solve, Params, SolveConfig};
//!
//! let spec = registry("logistic", &Params::new()).unwrap();
//! let report = solve(&spec, &SolveConfig::default(), None).unwrap();
//! assert!(report.objective < 1e-8);
//! ```

pub mod canonical;
pub mod classify;
pub mod discretize;
pub mod error;
pub mod field;
pub mod integrate;
pub mod linalg;
pub mod model;
pub mod protocol;
pub mod solver;

pub use canonical::{certify, dual_map, CertVerdict, DualField, TrialityCertificate};
pub use classify::{classify, pencil, ClassifyConfig, Verdict, VerdictKind};
pub use discretize::{objective, residuals, Trajectory};
pub use error::{Error, Result};
pub use field::Columns;
pub use integrate::{rk23, rk45, IntegratorOptions, IntegratorOutput, RkMethod};
pub use linalg::{EigenDecomp, SymMatrix};
pub use model::{parse_system_file, registry, Grid, IvpSpec, Params, QuadraticSystem};
pub use protocol::{compare, CompareConfig, CompareReport, Winner};
pub use solver::{solve, Anchor, Method, SolveConfig, SolveReport, SolveStatus};
