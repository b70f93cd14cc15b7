//! Problem parameters, solver configuration and the radial profile equation.

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, Error, Result};

/// The triple `(n, lambda, mu)`: dimension, self-similar rate and profile
/// height at the origin.
///
/// Only obtainable through [`validate`], so every value in circulation
/// satisfies `n >= 2`, `lambda > 0` and `mu < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParameters", into = "RawParameters")]
pub struct Parameters {
    n: u32,
    lambda: f64,
    mu: f64,
    global_regime: bool,
}

#[derive(Serialize, Deserialize)]
struct RawParameters {
    n: u32,
    lambda: f64,
    mu: f64,
    #[serde(default)]
    global_regime: Option<bool>,
}

impl TryFrom<RawParameters> for Parameters {
    type Error = Error;

    fn try_from(raw: RawParameters) -> Result<Self> {
        validate(raw.n, raw.lambda, raw.mu)
    }
}

impl From<Parameters> for RawParameters {
    fn from(p: Parameters) -> Self {
        RawParameters {
            n: p.n,
            lambda: p.lambda,
            mu: p.mu,
            global_regime: Some(p.global_regime),
        }
    }
}

/// Checks the parameter domain and annotates the global-existence regime
/// `lambda > 1/(n-1)`.
pub fn validate(n: u32, lambda: f64, mu: f64) -> Result<Parameters> {
    if n < 2 {
        return Err(DomainError::Dimension(n).into());
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(DomainError::Lambda(lambda).into());
    }
    if !(mu < 0.0) || !mu.is_finite() {
        return Err(DomainError::Mu(mu).into());
    }
    let global_regime = lambda * f64::from(n - 1) > 1.0;
    Ok(Parameters {
        n,
        lambda,
        mu,
        global_regime,
    })
}

impl Parameters {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// True iff `lambda > 1/(n-1)`.
    pub fn global_regime(&self) -> bool {
        self.global_regime
    }

    pub(crate) fn nf(&self) -> f64 {
        f64::from(self.n)
    }

    /// `lambda * (n - 1)`.
    pub fn lambda_n1(&self) -> f64 {
        self.lambda * f64::from(self.n - 1)
    }

    /// `f_rr(0) = 1 / (n lambda |mu|)`.
    pub fn origin_curvature(&self) -> f64 {
        1.0 / (self.nf() * self.lambda * self.mu.abs())
    }

    /// Same parameters with `mu` replaced; used by the scaling identity.
    pub fn with_mu(&self, mu: f64) -> Result<Parameters> {
        validate(self.n, self.lambda, mu)
    }

    /// Requires the global-existence regime.
    pub fn require_global(&self) -> Result<()> {
        if self.global_regime {
            Ok(())
        } else {
            Err(DomainError::Subcritical(self.lambda_n1()).into())
        }
    }
}

/// Right-hand side of the radial profile equation,
/// `f_rr = (1/lambda)(1+fr^2)^2/(r fr - f) - ((n-1)/r)(1+fr^2) fr`.
pub fn ode_rhs(params: &Parameters, r: f64, f: f64, fr: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::SingularRadius(r));
    }
    let w = r * fr - f;
    if !(w > 0.0) {
        return Err(Error::SingularDenominator { r, w });
    }
    let p = 1.0 + fr * fr;
    Ok(p * p / (params.lambda * w) - f64::from(params.n - 1) / r * p * fr)
}

/// Sampling policy for the continued profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OutputGrid {
    /// Nodes at integer multiples of `spacing`.
    Uniform { spacing: f64 },
    /// `per_decade` geometrically spaced nodes per factor of ten in r.
    Log { per_decade: u32 },
    /// Whatever steps the integrator accepts.
    AdaptiveNative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Handoff radius from the origin construction to the integrator.
    pub r_switch: f64,
    pub picard_max_iter: usize,
    pub picard_contraction_guard: f64,
    pub r_max: f64,
    pub output_grid: OutputGrid,
}

impl SolverConfig {
    /// Defaults scaled to the given parameters: `r_switch = 0.1 min(1, |mu|)`.
    pub fn for_params(params: &Parameters) -> Self {
        SolverConfig {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            r_switch: 0.1 * params.mu().abs().min(1.0),
            picard_max_iter: 200,
            picard_contraction_guard: 2.0 / 3.0,
            r_max: 100.0,
            output_grid: OutputGrid::Log { per_decade: 200 },
        }
    }

    pub fn with_r_max(mut self, r_max: f64) -> Self {
        self.r_max = r_max;
        self
    }

    /// Scales both tolerances by `factor`.
    pub fn scaled_tolerances(mut self, factor: f64) -> Self {
        self.abs_tol *= factor;
        self.rel_tol *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return bad("abs_tol and rel_tol must be positive");
        }
        if !(self.r_switch > 0.0) || !(self.r_switch <= self.r_max) || !self.r_max.is_finite() {
            return bad("require 0 < r_switch <= r_max < inf");
        }
        if !(self.picard_contraction_guard > 0.0 && self.picard_contraction_guard < 1.0) {
            return bad("picard_contraction_guard must lie in (0, 1)");
        }
        if self.picard_max_iter == 0 {
            return bad("picard_max_iter must be positive");
        }
        match self.output_grid {
            OutputGrid::Uniform { spacing } if !(spacing > 0.0) => bad("uniform spacing must be positive"),
            OutputGrid::Log { per_decade } if per_decade == 0 => bad("per_decade must be positive"),
            _ => Ok(()),
        }
    }
}
