//! Fixed-point construction of the profile on `[0, eps]`.
//!
//! The iterate is a pair `(g, h)` standing for `(f, f_r)`. One step maps it to
//!
//! ```text
//! g'(r) = mu + int_0^r h
//! h'(r) = (1/r) { E(r) - (n-2)/r^(n-2) int_0^r rho^(n-3) E(rho) drho }
//! E(r)  = (1/lambda) int_0^r s (1+h^2)^2 / (s h - g) ds - (n-1) int_0^r h^3 ds
//! ```
//!
//! on a uniform grid, measured in the norm `max(|g|_inf, sup_{s>0} |h(s)|/sqrt(s))`
//! and confined to the ball of radius `|mu|/4` about `(mu, 0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ode_rhs, Parameters, SolverConfig};
use crate::profile::{ProfilePoint, Provenance, RadialProfile};
use crate::quadrature::cumulative_simpson_uniform;

/// Maximum number of interval halvings before giving up.
const MAX_RESTARTS: usize = 40;

/// Number of leading successive-distance ratios treated as transient.
const TRANSIENT_RATIOS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct PicardState {
    pub eps: f64,
    pub grid: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

impl PicardState {
    /// Constant state `(mu, 0)` on a uniform grid of `intervals` steps over `[0, eps]`.
    pub fn initial(params: &Parameters, eps: f64, intervals: usize) -> Self {
        let n = intervals.max(2);
        let grid: Vec<f64> = (0..=n).map(|i| eps * i as f64 / n as f64).collect();
        PicardState {
            eps,
            g: vec![params.mu(); grid.len()],
            h: vec![0.0; grid.len()],
            grid,
        }
    }

    fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Weighted distance to another state on the same grid.
    pub fn distance(&self, other: &PicardState) -> f64 {
        weighted_norm(&self.grid, self.g.iter().zip(&other.g).map(|(a, b)| a - b), self.h.iter().zip(&other.h).map(|(a, b)| a - b))
    }

    /// Weighted distance to the constant state `(mu, 0)`.
    pub fn distance_to_base(&self, mu: f64) -> f64 {
        weighted_norm(&self.grid, self.g.iter().map(|g| g - mu), self.h.iter().copied())
    }
}

fn weighted_norm(grid: &[f64], dg: impl Iterator<Item = f64>, dh: impl Iterator<Item = f64>) -> f64 {
    let g_sup = dg.fold(0.0f64, |m, v| m.max(v.abs()));
    // the s = 0 node is excluded: the norm is a supremum over (0, eps]
    let h_sup = grid
        .iter()
        .zip(dh)
        .skip(1)
        .fold(0.0f64, |m, (s, v)| m.max(v.abs() / s.sqrt()));
    g_sup.max(h_sup)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardDiagnostics {
    pub iterations: usize,
    pub distances: Vec<f64>,
    /// Largest successive-distance ratio after the first transient ratios.
    pub observed_ratio: f64,
    pub converged: bool,
    /// Interval half-length of the accepted run.
    pub eps: f64,
    /// Number of interval halvings before acceptance.
    pub restarts: usize,
    /// Minimum of `s h - g` over the accepted iterates.
    pub min_denominator: f64,
}

/// Largest ratio `d[k+1]/d[k]` once the first `skip` ratios are discarded.
pub(crate) fn tail_ratio(distances: &[f64], skip: usize) -> f64 {
    let ratios: Vec<f64> = distances
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .collect();
    let tail = if ratios.len() > skip { &ratios[skip..] } else { &ratios[..] };
    tail.iter().copied().fold(0.0, f64::max)
}

/// One application of the fixed-point map.
pub fn phi_step(params: &Parameters, state: &PicardState) -> Result<PicardState> {
    let mu = params.mu();
    let lambda = params.lambda();
    let n = params.n() as i32;
    let ds = state.spacing();
    let s = &state.grid;

    let mut frac = Vec::with_capacity(s.len());
    let mut cube = Vec::with_capacity(s.len());
    for i in 0..s.len() {
        let (g, h) = (state.g[i], state.h[i]);
        let den = s[i] * h - g;
        if !(den > 0.0) {
            return Err(Error::DenominatorCollapse { s: s[i], value: den });
        }
        let p = 1.0 + h * h;
        frac.push(s[i] * p * p / den);
        cube.push(h * h * h);
    }
    let int_frac = cumulative_simpson_uniform(ds, &frac);
    let int_cube = cumulative_simpson_uniform(ds, &cube);
    let int_h = cumulative_simpson_uniform(ds, &state.h);
    let e: Vec<f64> = int_frac
        .iter()
        .zip(&int_cube)
        .map(|(a, b)| a / lambda - f64::from(n - 1) * b)
        .collect();

    let inner = if n > 2 {
        let weighted: Vec<f64> = s.iter().zip(&e).map(|(rho, ev)| rho.powi(n - 3) * ev).collect();
        Some(cumulative_simpson_uniform(ds, &weighted))
    } else {
        None
    };

    let g_new: Vec<f64> = int_h.iter().map(|v| mu + v).collect();
    let mut h_new = vec![0.0; s.len()];
    for i in 1..s.len() {
        let r = s[i];
        let mut v = e[i];
        if let Some(inner) = &inner {
            v -= f64::from(n - 2) * inner[i] / r.powi(n - 2);
        }
        h_new[i] = v / r;
    }
    Ok(PicardState {
        eps: state.eps,
        grid: state.grid.clone(),
        g: g_new,
        h: h_new,
    })
}

/// Trust-ball radius `eta = |mu| / 4`.
pub fn ball_radius(params: &Parameters) -> f64 {
    params.mu().abs() / 4.0
}

/// Grid intervals for a given interval length: `max(64, eps / sqrt(abs_tol))`, rounded up to even.
pub fn grid_intervals(eps: f64, abs_tol: f64) -> usize {
    let n = ((eps / abs_tol.sqrt()).ceil() as usize).max(64);
    n + n % 2
}

enum Attempt {
    Accepted(PicardState, PicardDiagnostics),
    Shrink { ratio: f64, iterations: usize },
}

fn attempt(params: &Parameters, config: &SolverConfig, eps: f64) -> Result<Attempt> {
    let eta = ball_radius(params);
    let mut state = PicardState::initial(params, eps, grid_intervals(eps, config.abs_tol));
    let mut distances = Vec::new();
    let mut min_den = f64::INFINITY;
    for it in 1..=config.picard_max_iter {
        let next = match phi_step(params, &state) {
            Ok(next) => next,
            Err(Error::DenominatorCollapse { .. }) => return Ok(Attempt::Shrink { ratio: f64::NAN, iterations: it }),
            Err(e) => return Err(e),
        };
        if next.distance_to_base(params.mu()) > eta {
            return Ok(Attempt::Shrink { ratio: f64::NAN, iterations: it });
        }
        let lower = next
            .grid
            .iter()
            .zip(next.g.iter().zip(&next.h))
            .map(|(s, (g, h))| s * h - g)
            .fold(f64::INFINITY, f64::min);
        min_den = min_den.min(lower);
        if lower < params.mu().abs() / 2.0 {
            return Ok(Attempt::Shrink { ratio: f64::NAN, iterations: it });
        }
        let d = next.distance(&state);
        distances.push(d);
        state = next;
        let ratio = tail_ratio(&distances, TRANSIENT_RATIOS);
        if distances.len() > TRANSIENT_RATIOS + 1 && ratio > config.picard_contraction_guard {
            return Ok(Attempt::Shrink { ratio, iterations: it });
        }
        if d <= config.abs_tol {
            let diag = PicardDiagnostics {
                iterations: it,
                observed_ratio: ratio,
                distances,
                converged: true,
                eps,
                restarts: 0,
                min_denominator: min_den,
            };
            return Ok(Attempt::Accepted(state, diag));
        }
    }
    let ratio = tail_ratio(&distances, TRANSIENT_RATIOS);
    Ok(Attempt::Shrink {
        ratio,
        iterations: config.picard_max_iter,
    })
}

/// Converts a converged state into a profile; `frr` comes from the profile
/// equation away from the origin and from `1/(n lambda |mu|)` at it.
pub fn state_to_profile(params: &Parameters, state: &PicardState) -> Result<RadialProfile> {
    let mut pts = Vec::with_capacity(state.grid.len());
    for i in 0..state.grid.len() {
        let r = state.grid[i];
        let (f, fr) = (state.g[i], state.h[i]);
        let frr = if i == 0 {
            params.origin_curvature()
        } else {
            ode_rhs(params, r, f, fr)?
        };
        pts.push(ProfilePoint { r, f, fr, frr });
    }
    RadialProfile::new(*params, pts, Provenance::Picard)
}

/// Iterates the fixed-point map from `(mu, 0)` on `[0, eps]`, halving `eps`
/// (starting from `min(1, |mu|/4)`) whenever the iterate leaves the trust
/// ball or the observed contraction exceeds the configured guard.
pub fn solve_origin(params: &Parameters, config: &SolverConfig) -> Result<(RadialProfile, PicardDiagnostics)> {
    let mut eps = 1f64.min(params.mu().abs() / 4.0);
    let mut last_ratio = f64::NAN;
    let mut last_iters = 0;
    for restart in 0..=MAX_RESTARTS {
        match attempt(params, config, eps)? {
            Attempt::Accepted(state, mut diag) => {
                diag.restarts = restart;
                let profile = state_to_profile(params, &state)?;
                return Ok((profile, diag));
            }
            Attempt::Shrink { ratio, iterations } => {
                last_ratio = ratio;
                last_iters = iterations;
                eps /= 2.0;
            }
        }
    }
    Err(Error::NoConvergence {
        eps: eps * 2.0,
        ratio: last_ratio,
        iterations: last_iters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::validate;

    #[test]
    fn constant_input_closed_form() {
        for (n, lambda, mu) in [(2, 1.0, -1.0), (3, 2.0, -0.5), (4, 1.5, -4.0)] {
            let p = validate(n, lambda, mu).unwrap();
            let st = PicardState::initial(&p, 0.2, 400);
            let out = phi_step(&p, &st).unwrap();
            for (i, r) in out.grid.iter().enumerate() {
                assert!((out.g[i] - mu).abs() < 1e-15);
                let expected = r / (n as f64 * lambda * mu.abs());
                assert!((out.h[i] - expected).abs() < 1e-13, "n={n} r={r}: {} vs {expected}", out.h[i]);
            }
        }
    }

    #[test]
    fn constant_input_specialisation() {
        let p = validate(2, 1.0, -1.0).unwrap();
        let st = PicardState::initial(&p, 0.1, 100);
        let out = phi_step(&p, &st).unwrap();
        assert!((out.h[100] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn denominator_collapse_detected() {
        let p = validate(2, 1.0, -1.0).unwrap();
        let mut st = PicardState::initial(&p, 0.1, 10);
        st.g[3] = 1.0;
        assert!(matches!(phi_step(&p, &st), Err(Error::DenominatorCollapse { .. })));
    }

    #[test]
    fn weighted_norm_skips_origin() {
        let p = validate(2, 1.0, -1.0).unwrap();
        let mut st = PicardState::initial(&p, 1.0, 4);
        st.h[0] = 100.0;
        assert_eq!(st.distance_to_base(-1.0), 0.0);
        st.h[4] = 0.5;
        assert!((st.distance_to_base(-1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn contraction_on_ball() {
        let p = validate(2, 2.0, -1.0).unwrap();
        let eps = 0.0625;
        let a = PicardState::initial(&p, eps, 256);
        let mut b = a.clone();
        for (i, s) in b.grid.clone().iter().enumerate() {
            b.g[i] = p.mu() + 0.1 * (3.0 * s).sin();
            b.h[i] = 0.2 * s.sqrt() * (1.0 - s);
        }
        assert!(b.distance_to_base(p.mu()) <= ball_radius(&p));
        let (fa, fb) = (phi_step(&p, &a).unwrap(), phi_step(&p, &b).unwrap());
        assert!(fa.distance(&fb) <= 2.0 / 3.0 * a.distance(&b));
    }

    #[test]
    fn solve_origin_limit_at_origin() {
        let p = validate(2, 1.0, -1.0).unwrap();
        let cfg = SolverConfig::for_params(&p);
        let (prof, diag) = solve_origin(&p, &cfg).unwrap();
        assert!(diag.converged);
        assert!(diag.observed_ratio <= cfg.picard_contraction_guard);
        let pt = prof.eval(1e-3).unwrap();
        assert!((pt.fr / pt.r - 0.5).abs() < 1e-6);
        assert!(diag.min_denominator >= 0.5);
    }

    #[test]
    fn solve_origin_other_parameters() {
        let p = validate(3, 2.0, -0.5).unwrap();
        let cfg = SolverConfig::for_params(&p);
        let (prof, diag) = solve_origin(&p, &cfg).unwrap();
        let pt = prof.eval(prof.r_max() / 1000.0).unwrap();
        assert!((pt.fr / pt.r - 1.0 / 3.0).abs() < 1e-6);
        assert!(diag.observed_ratio <= 2.0 / 3.0);
        for w in diag.distances.windows(2).skip(TRANSIENT_RATIOS) {
            if w[0] > 1e3 * cfg.abs_tol {
                assert!(w[1] / w[0] <= 2.0 / 3.0);
            }
        }
    }

    #[test]
    fn tail_ratio_skips_transient() {
        assert_eq!(tail_ratio(&[1.0, 2.0, 0.2, 0.1], 1), 0.5);
        assert_eq!(tail_ratio(&[1.0, 2.0], 1), 2.0);
    }
}
