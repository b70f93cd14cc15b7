//! Self-similar radial profiles of the inverse mean curvature flow.
//!
//! A profile `f(r)` with `u(x, t) = e^{lambda t} f(e^{-lambda t} |x|)` solves
//!
//! ```text
//! f_rr + ((n-1)/r)(1+f_r^2) f_r - (1/lambda)(1+f_r^2)^2 / (r f_r - f) = 0,
//! f(0) = mu < 0,  f_r(0) = 0.
//! ```
//!
//! The crate builds the solution near the origin by a fixed-point iteration,
//! continues it outward, estimates the limit of `r f_r / f`, and checks the
//! result against several independent identities.

pub mod asymptotics;
pub mod continuation;
pub mod error;
mod integrate;
pub mod origin;
pub mod params;
pub mod profile;
pub mod quadrature;
pub mod series;
pub mod solver;
pub mod verify;

pub use asymptotics::{alpha0, estimate_limit, q_of, AsymptoticsReport};
pub use continuation::{detect_breakdown, extend_picard, extend_rk, ExtensionWindow, Mode, MonitorEvent, MonitorKind};
pub use error::{DomainError, Error, Result};
pub use origin::{phi_step, solve_origin, PicardDiagnostics, PicardState};
pub use params::{ode_rhs, validate, OutputGrid, Parameters, SolverConfig};
pub use profile::{ProfilePoint, Provenance, RadialEval, RadialProfile};
pub use series::taylor_bootstrap;
pub use solver::{solve, Solution};
pub use verify::{SelfSimilarSolution, VerificationReport};
