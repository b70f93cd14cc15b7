use thiserror::Error;

use crate::continuation::MonitorEvent;

/// Parameter-domain violations.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum DomainError {
    #[error("dimension n = {0} must satisfy n >= 2")]
    Dimension(u32),
    #[error("lambda = {0} must be positive")]
    Lambda(f64),
    #[error("mu = {0} must be negative")]
    Mu(f64),
    /// `lambda * (n - 1) <= 1`: outside the regime where the asymptotic slope is defined.
    #[error("lambda*(n-1) = {0} must exceed 1 (threshold lambda > 1/(n-1))")]
    Subcritical(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),

    #[error("invalid solver configuration: {0}")]
    Config(String),

    #[error("singular denominator r*fr - f = {w:e} at r = {r}")]
    SingularDenominator { r: f64, w: f64 },

    #[error("singular radius r = {0} (must be positive)")]
    SingularRadius(f64),

    #[error("radius {r} outside profile range [0, {r_max}]")]
    OutOfRange { r: f64, r_max: f64 },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("fixed-point denominator s*h - g = {value:e} collapsed at s = {s}")]
    DenominatorCollapse { s: f64, value: f64 },

    #[error("iterate left the trust ball: distance {distance:e} > radius {radius:e}")]
    BallEscape { distance: f64, radius: f64 },

    #[error("fixed-point iteration did not converge (interval {eps:e}, last ratio {ratio:.3}, {iterations} iterations)")]
    NoConvergence { eps: f64, ratio: f64, iterations: usize },

    #[error("step size {h:e} underflowed at r = {r}")]
    StepUnderflow { r: f64, h: f64 },

    #[error("profile height {f:e} too close to zero at r = {r}")]
    ZeroHeight { r: f64, f: f64 },

    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    #[error("series evaluation at r = {r_probe} outside estimated radius {radius:e}")]
    SeriesDivergence { r_probe: f64, radius: f64 },

    #[error("mean-curvature term {value:e} vanishes at xi = {xi}")]
    VanishingMeanCurvature { xi: f64, value: f64 },

    #[error("structural invariant broken: {0}")]
    Breakdown(MonitorEvent),
}

pub type Result<T> = std::result::Result<T, Error>;
