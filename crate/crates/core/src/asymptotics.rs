//! Large-`r` behaviour of the slope ratio `q = r f_r / f`.

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, Error, Result};
use crate::params::Parameters;
use crate::profile::{RadialEval, RadialProfile};

/// Limit of `q`: `lambda (n-1) / (lambda (n-1) - 1)`.
pub fn alpha0(params: &Parameters) -> Result<f64> {
    let l = params.lambda_n1();
    if !(l > 1.0) {
        return Err(DomainError::Subcritical(l).into());
    }
    Ok(l / (l - 1.0))
}

/// `r f_r / f` at `r`. Fails where `|f|` is at rounding level relative to
/// the terms it is computed from.
pub fn q_of<P: RadialEval + ?Sized>(profile: &P, r: f64) -> Result<f64> {
    let p = profile.eval(r)?;
    let floor = 64.0 * f64::EPSILON * (profile.params().mu().abs() + r * p.fr.abs());
    if !(p.f.abs() > floor) {
        return Err(Error::ZeroHeight { r, f: p.f });
    }
    Ok(r * p.fr / p.f)
}

/// Closed-form `q_r` given `(r, q, f_r)`.
pub fn q_rhs(params: &Parameters, r: f64, q: f64, fr: f64) -> f64 {
    let s = 1.0 + fr * fr;
    let inner = q * (1.0 + 1.0 / (fr * fr)) / (params.lambda() * (q - 1.0)) - (params.nf() - 1.0);
    q / r * (s * inner + 1.0 - q)
}

/// Centred difference of `q` with half-width `h` minus the closed-form `q_r`.
pub fn q_ode_residual<P: RadialEval + ?Sized>(profile: &P, r: f64, h: f64) -> Result<f64> {
    let dq = (q_of(profile, r + h)? - q_of(profile, r - h)?) / (2.0 * h);
    let p = profile.eval(r)?;
    let q = q_of(profile, r)?;
    Ok(dq - q_rhs(profile.params(), r, q, p.fr))
}

/// Limit of `q` extrapolated from three samples at geometric ratio `k`.
/// Returns `(limit, order)` or `None` when the differences do not shrink
/// geometrically.
pub fn aitken(q1: f64, q2: f64, q3: f64, k: f64) -> Option<(f64, f64)> {
    let d1 = q2 - q1;
    let d2 = q3 - q2;
    let denom = d2 - d1;
    if denom == 0.0 || d2 == 0.0 || d1 == 0.0 {
        return None;
    }
    let rho = d2 / d1;
    if !(rho > 0.0 && rho < 1.0) {
        return None;
    }
    Some((q3 - d2 * d2 / denom, -rho.ln() / k.ln()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub alpha0: f64,
    /// `(r, q)` on log-spaced radii over the last two decades.
    pub q_samples: Vec<(f64, f64)>,
    pub q_limit_estimate: f64,
    pub extrapolation_uncertainty: f64,
    /// Fitted decay exponent `p` in `q ~ q_inf + c r^-p`, when available.
    pub convergence_order: Option<f64>,
    /// Slope of `log f` against `log r` over the last decade.
    pub fit_exponent: f64,
    pub q_at_r_max: f64,
    /// Half-width of the band about `alpha0` used for the persistence check.
    pub band_epsilon: f64,
    /// First node radius where `q` is inside the band.
    pub band_entry_r: Option<f64>,
    /// True when `q` never leaves the band after entering it.
    pub band_persistent: bool,
    pub pass: bool,
}

const SAMPLES_PER_DECADE: usize = 8;
const TRIPLE_STRIDE: usize = 4;

/// Radius of the first node after the last node with `f <= 0`.
fn positive_from(profile: &RadialProfile) -> Option<f64> {
    let pts = profile.points();
    match pts.iter().rposition(|p| p.f <= 0.0) {
        Some(i) if i + 1 < pts.len() => Some(pts[i + 1].r),
        Some(_) => None,
        None => pts.get(1).map(|p| p.r),
    }
}

/// Estimates `lim q` from the last two decades of the profile.
pub fn estimate_limit(profile: &RadialProfile, params: &Parameters) -> Result<AsymptoticsReport> {
    let a0 = alpha0(params)?;
    let r_max = profile.r_max();
    let r_pos = positive_from(profile)
        .ok_or_else(|| Error::InsufficientRange(format!("f is not positive at r_max = {r_max}")))?;
    if r_max < 100.0 * r_pos {
        return Err(Error::InsufficientRange(format!(
            "need two decades with f > 0; f > 0 only on [{r_pos}, {r_max}]"
        )));
    }

    let count = 2 * SAMPLES_PER_DECADE;
    let mut q_samples = Vec::with_capacity(count + 1);
    for j in (0..=count).rev() {
        let r = if j == 0 {
            r_max
        } else {
            r_max * 10f64.powf(-(j as f64) / SAMPLES_PER_DECADE as f64)
        };
        q_samples.push((r, q_of(profile, r)?));
    }

    let k = 10f64.powf(TRIPLE_STRIDE as f64 / SAMPLES_PER_DECADE as f64);
    let mut triples = Vec::new();
    for i in 0..=count - 2 * TRIPLE_STRIDE {
        let (q1, q2, q3) = (q_samples[i].1, q_samples[i + TRIPLE_STRIDE].1, q_samples[i + 2 * TRIPLE_STRIDE].1);
        triples.push(aitken(q1, q2, q3, k));
    }
    let last3 = &triples[triples.len() - 3..];
    let q_end = q_samples[count].1;
    let (estimate, uncertainty, order) = if last3.iter().all(Option::is_some) {
        let vals: Vec<(f64, f64)> = last3.iter().map(|t| t.unwrap()).collect();
        let lo = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
        let hi = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
        (vals[2].0, hi - lo, Some(vals[2].1))
    } else {
        // no geometric decay to exploit: report the last sample and the
        // variation over the last two decades
        let q_first = q_samples[count - 2 * TRIPLE_STRIDE].1;
        (q_end, (q_first - q_end).abs(), None)
    };

    let fit_exponent = {
        let pts: Vec<(f64, f64)> = (0..=32)
            .map(|j| r_max * 10f64.powf(-(j as f64) / 32.0))
            .map(|r| profile.eval(r).map(|p| (r.ln(), p.f)))
            .collect::<Result<_>>()?;
        if pts.iter().any(|(_, f)| *f <= 0.0) {
            return Err(Error::InsufficientRange("f not positive over the last decade".into()));
        }
        let xy: Vec<(f64, f64)> = pts.iter().map(|(x, f)| (*x, f.ln())).collect();
        let m = xy.len() as f64;
        let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
        let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
        let sxy: f64 = xy.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xy.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
        sxy / sxx
    };

    let band_epsilon = 0.5 * (a0 - 1.0).min(1.0);
    let (band_entry_r, band_persistent) = band_persistence(profile, a0, band_epsilon);
    let pass = (estimate - a0).abs() <= (3.0 * uncertainty).max(1e-3);
    Ok(AsymptoticsReport {
        alpha0: a0,
        q_samples,
        q_limit_estimate: estimate,
        extrapolation_uncertainty: uncertainty,
        convergence_order: order,
        fit_exponent,
        q_at_r_max: q_end,
        band_epsilon,
        band_entry_r,
        band_persistent,
        pass,
    })
}

/// First node where `|q - alpha0| <= eps` and whether `q` stays inside
/// the band at every later node.
pub fn band_persistence(profile: &RadialProfile, alpha0: f64, eps: f64) -> (Option<f64>, bool) {
    let mut entry = None;
    for p in profile.points().iter().filter(|p| p.f > 0.0) {
        let inside = p.q().is_some_and(|q| (q - alpha0).abs() <= eps);
        match (entry, inside) {
            (None, true) => entry = Some(p.r),
            (Some(_), false) => return (entry, false),
            _ => {}
        }
    }
    (entry, true)
}
