//! Adaptive integration of the radial profile equation away from the origin.
//!
//! The state is `(f, d)` with `d = c f - r f_r`, where `c = alpha0` in the
//! global regime. In these variables the right-hand side
//!
//! ```text
//! f_rr = (1 + f_r^2) (r + f_r (l f + K d)) / (lambda w r),
//! K = lambda (n-1) - 1,  l = lambda (n-1) - K c,  w = (c - 1) f - d
//! ```
//!
//! has no cancellation once `f_r` is large (`l = 0` for `c = alpha0`), whereas
//! the textbook form loses about `log10(f_r^2)` digits.
//!
//! For large `r` the system becomes stiff: the slope ratio is attracted to
//! its limit at a rate growing like `f_r^2 / r`. Integration starts with the
//! Dormand-Prince 5(4) pair and switches to the 3-stage Radau IIA method
//! (order 5, step-doubling error control) once the explicit step size is
//! pinned at its stability bound.

use crate::error::{Error, Result};
use crate::params::Parameters;
use crate::profile::ProfilePoint;

/// Largest `alpha0` used as the split constant; beyond it `c = 1`.
const MAX_SPLIT_CONSTANT: f64 = 16.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitSystem {
    lambda: f64,
    c: f64,
    k: f64,
    lin: f64,
}

impl SplitSystem {
    pub(crate) fn new(params: &Parameters) -> Self {
        let ln1 = params.lambda_n1();
        let k = ln1 - 1.0;
        let (c, lin) = if k > 0.0 && ln1 / k <= MAX_SPLIT_CONSTANT {
            (ln1 / k, 0.0)
        } else {
            (1.0, 1.0)
        };
        SplitSystem {
            lambda: params.lambda(),
            c,
            k,
            lin,
        }
    }

    pub(crate) fn to_split(&self, r: f64, f: f64, fr: f64) -> [f64; 2] {
        [f, self.c * f - r * fr]
    }

    pub(crate) fn fr(&self, r: f64, y: &[f64; 2]) -> f64 {
        (self.c * y[0] - y[1]) / r
    }

    pub(crate) fn w(&self, y: &[f64; 2]) -> f64 {
        (self.c - 1.0) * y[0] - y[1]
    }

    pub(crate) fn frr(&self, r: f64, y: &[f64; 2]) -> Result<f64> {
        let w = self.w(y);
        if !(w > 0.0) {
            return Err(Error::SingularDenominator { r, w });
        }
        let fr = self.fr(r, y);
        let num = r + fr * (self.lin * y[0] + self.k * y[1]);
        Ok((1.0 + fr * fr) * num / (self.lambda * w * r))
    }

    fn rhs(&self, r: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        let fr = self.fr(r, y);
        let frr = self.frr(r, y)?;
        Ok([fr, (self.c - 1.0) * fr - r * frr])
    }

    pub(crate) fn point(&self, r: f64, y: &[f64; 2]) -> Result<ProfilePoint> {
        Ok(ProfilePoint {
            r,
            f: y[0],
            fr: self.fr(r, y),
            frr: self.frr(r, y)?,
        })
    }

    /// Error norm in `(f, f_r)` units, so the tolerance refers to the
    /// profile and not to the auxiliary variable.
    fn error_norm(&self, r: f64, e: &[f64; 2], y0: &[f64; 2], y1: &[f64; 2], tol: &Tolerance) -> f64 {
        let e_fr = (self.c * e[0] - e[1]) / r;
        let sf = tol.abs + tol.rel * y0[0].abs().max(y1[0].abs());
        let sfr = tol.abs + tol.rel * self.fr(r, y0).abs().max(self.fr(r, y1).abs());
        (e[0].abs() / sf).max(e_fr.abs() / sfr)
    }

    /// Newton weights in `(f, d)` units.
    fn newton_weights(&self, r: f64, y: &[f64; 2], tol: &Tolerance) -> [f64; 2] {
        [tol.abs + tol.rel * y[0].abs(), r * tol.abs + tol.rel * y[1].abs()]
    }

    #[cfg(test)]
    pub(crate) fn split_constant(&self) -> f64 {
        self.c
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Method {
    Explicit,
    Implicit,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Accepted {
    pub r: f64,
    pub y: [f64; 2],
    /// Local error estimate in units of `f`, `max(|e_f|, r |e_fr|)`.
    pub local_error: f64,
    /// True when `r` is one of the requested output radii.
    pub on_target: bool,
}

pub(crate) enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct MarchStats {
    pub accepted: usize,
    pub rejected: usize,
    pub stiff_switch_r: Option<f64>,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Stability-bound threshold for `h * rho` of the explicit pair.
const STIFF_THRESHOLD: f64 = 3.25;
const STIFF_COUNT: usize = 15;

struct ExplicitStep {
    y: [f64; 2],
    k_last: [f64; 2],
    err: f64,
    local_error: f64,
    h_rho: f64,
}

fn axpy(y: &[f64; 2], h: f64, terms: &[(f64, &[f64; 2])]) -> [f64; 2] {
    let mut out = *y;
    for (a, k) in terms {
        out[0] += h * a * k[0];
        out[1] += h * a * k[1];
    }
    out
}

fn dp_step(sys: &SplitSystem, r: f64, y: &[f64; 2], k1: &[f64; 2], h: f64, tol: &Tolerance) -> Result<ExplicitStep> {
    let mut k = [[0.0; 2]; 7];
    k[0] = *k1;
    let mut ys = *y;
    for s in 1..7 {
        let terms: Vec<(f64, &[f64; 2])> = (0..s).map(|j| (A[s][j], &k[j])).collect();
        ys = axpy(y, h, &terms);
        k[s] = sys.rhs(r + C[s] * h, &ys)?;
    }
    // stage 7 evaluates at the new point (first-same-as-last)
    let y_new = ys;
    let mut e = [0.0; 2];
    for s in 0..7 {
        e[0] += h * E[s] * k[s][0];
        e[1] += h * E[s] * k[s][1];
    }
    let r_new = r + h;
    let err = sys.error_norm(r_new, &e, y, &y_new, tol);
    let e_fr = (sys.c * e[0] - e[1]) / r_new;
    // stiffness indicator from the last two stages, which share the abscissa
    let y6 = axpy(y, h, &(0..5).map(|j| (A[5][j], &k[j])).collect::<Vec<_>>());
    let dk = ((k[6][0] - k[5][0]).powi(2) + (k[6][1] - k[5][1]).powi(2)).sqrt();
    let dy = ((y_new[0] - y6[0]).powi(2) + (y_new[1] - y6[1]).powi(2)).sqrt();
    let h_rho = if dy > 0.0 { h * dk / dy } else { 0.0 };
    Ok(ExplicitStep {
        y: y_new,
        k_last: k[6],
        err,
        local_error: e[0].abs().max(r_new * e_fr.abs()),
        h_rho,
    })
}

// Radau IIA, three stages, order five.
fn radau_tableau() -> ([f64; 3], [[f64; 3]; 3]) {
    let s6 = 6f64.sqrt();
    let c = [(4.0 - s6) / 10.0, (4.0 + s6) / 10.0, 1.0];
    let a = [
        [(88.0 - 7.0 * s6) / 360.0, (296.0 - 169.0 * s6) / 1800.0, (-2.0 + 3.0 * s6) / 225.0],
        [(296.0 + 169.0 * s6) / 1800.0, (88.0 + 7.0 * s6) / 360.0, (-2.0 - 3.0 * s6) / 225.0],
        [(16.0 - s6) / 36.0, (16.0 + s6) / 36.0, 1.0 / 9.0],
    ];
    (c, a)
}

fn jacobian(sys: &SplitSystem, r: f64, y: &[f64; 2], f0: &[f64; 2]) -> Result<[[f64; 2]; 2]> {
    let mut jac = [[0.0; 2]; 2];
    for j in 0..2 {
        let delta = (f64::EPSILON.sqrt() * y[j].abs()).max(1e-8 * (1.0 + y[0].abs()) * f64::EPSILON.sqrt());
        let mut yp = *y;
        yp[j] += delta;
        let fp = sys.rhs(r, &yp)?;
        for i in 0..2 {
            jac[i][j] = (fp[i] - f0[i]) / delta;
        }
    }
    Ok(jac)
}

/// Dense LU solve with partial pivoting, in place.
fn solve_linear<const N: usize>(mut m: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let piv = (col..N).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 || !m[piv][col].is_finite() {
            return None;
        }
        m.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..N {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                for k in col..N {
                    m[row][k] -= factor * m[col][k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let mut s = b[row];
        for k in row + 1..N {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    Some(x)
}

const NEWTON_MAX_ITER: usize = 12;

/// One Radau IIA step; `None` when the simplified Newton iteration fails.
fn radau_step(sys: &SplitSystem, r: f64, y: &[f64; 2], h: f64, tol: &Tolerance) -> Result<Option<[f64; 2]>> {
    let (c, a) = radau_tableau();
    let f0 = sys.rhs(r, y)?;
    let jac = jacobian(sys, r, y, &f0)?;
    let mut m = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            for p in 0..2 {
                for q in 0..2 {
                    let ident = if i == j && p == q { 1.0 } else { 0.0 };
                    m[2 * i + p][2 * j + q] = ident - h * a[i][j] * jac[p][q];
                }
            }
        }
    }
    let wts = sys.newton_weights(r, y, tol);
    let mut z = [0.0; 6];
    let mut prev_norm = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let mut fz = [[0.0; 2]; 3];
        for j in 0..3 {
            let yj = [y[0] + z[2 * j], y[1] + z[2 * j + 1]];
            fz[j] = match sys.rhs(r + c[j] * h, &yj) {
                Ok(v) => v,
                Err(Error::SingularDenominator { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
        }
        let mut g = [0.0; 6];
        for i in 0..3 {
            for p in 0..2 {
                let mut s = z[2 * i + p];
                for j in 0..3 {
                    s -= h * a[i][j] * fz[j][p];
                }
                g[2 * i + p] = -s;
            }
        }
        let Some(dz) = solve_linear(m, g) else {
            return Ok(None);
        };
        let mut norm = 0.0f64;
        for i in 0..6 {
            z[i] += dz[i];
            norm = norm.max(dz[i].abs() / wts[i % 2]);
        }
        if !norm.is_finite() {
            return Ok(None);
        }
        if norm <= 1e-3 || (norm <= 1.0 && norm >= 0.5 * prev_norm) {
            // the final stage of a stiffly accurate method is the new state
            return Ok(Some([y[0] + z[4], y[1] + z[5]]));
        }
        if norm > 2.0 * prev_norm {
            return Ok(None);
        }
        prev_norm = norm;
    }
    Ok(None)
}

/// Marches from `(r0, y0)` through the ascending `targets`, calling
/// `on_step` for every accepted step. When `native` is false each target is
/// hit exactly by an accepted step.
pub(crate) fn march(
    sys: &SplitSystem,
    r0: f64,
    y0: [f64; 2],
    targets: &[f64],
    native: bool,
    tol: Tolerance,
    mut on_step: impl FnMut(&Accepted) -> Result<Flow>,
) -> Result<MarchStats> {
    let mut stats = MarchStats::default();
    let Some(&r_end) = targets.last() else {
        return Ok(stats);
    };
    if r_end <= r0 {
        return Ok(stats);
    }
    let mut r = r0;
    let mut y = y0;
    let mut k1 = sys.rhs(r, &y)?;
    let mut h = 1e-2 * r0.max(1e-3) * tol.rel.max(1e-12).powf(0.2) * 10.0;
    let mut method = Method::Explicit;
    let mut stiff_hits = 0usize;
    let mut calm = 0usize;
    let mut next_target = targets.partition_point(|&t| t <= r0);

    while r < r_end {
        let target = if native { r_end } else { targets[next_target] };
        let mut step = h;
        let mut on_target = false;
        if r + step >= target - 1e-2 * step {
            step = target - r;
            on_target = true;
        }
        if step < 1e3 * f64::EPSILON * r {
            return Err(Error::StepUnderflow { r, h: step });
        }
        match method {
            Method::Explicit => {
                let out = dp_step(sys, r, &y, &k1, step, &tol);
                let out = match out {
                    Ok(o) if o.err.is_finite() => o,
                    Ok(_) | Err(Error::SingularDenominator { .. }) => {
                        stats.rejected += 1;
                        h = step * 0.25;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                if out.err <= 1.0 {
                    r = if on_target { target } else { r + step };
                    y = out.y;
                    k1 = out.k_last;
                    stats.accepted += 1;
                    let factor = (0.9 * out.err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                    if !on_target || factor < 1.0 {
                        h = step * factor;
                    }
                    if out.h_rho > STIFF_THRESHOLD {
                        stiff_hits += 1;
                        calm = 0;
                        if stiff_hits >= STIFF_COUNT {
                            method = Method::Implicit;
                            stats.stiff_switch_r = Some(r);
                        }
                    } else {
                        calm += 1;
                        if calm >= 6 {
                            stiff_hits = 0;
                        }
                    }
                    let acc = Accepted {
                        r,
                        y,
                        local_error: out.local_error,
                        on_target: on_target && !native,
                    };
                    if on_target && !native {
                        next_target += 1;
                    }
                    if let Flow::Stop = on_step(&acc)? {
                        return Ok(stats);
                    }
                } else {
                    stats.rejected += 1;
                    h = step * (0.9 * out.err.powf(-0.2)).clamp(0.1, 0.9);
                }
            }
            Method::Implicit => {
                let full = radau_step(sys, r, &y, step, &tol)?;
                let half = step / 2.0;
                let two_halves = match radau_step(sys, r, &y, half, &tol)? {
                    Some(mid) => radau_step(sys, r + half, &mid, step - half, &tol)?,
                    None => None,
                };
                let (Some(full), Some(fine)) = (full, two_halves) else {
                    stats.rejected += 1;
                    h = step * 0.25;
                    continue;
                };
                let e = [(fine[0] - full[0]) / 31.0, (fine[1] - full[1]) / 31.0];
                let r_new = if on_target { target } else { r + step };
                let err = sys.error_norm(r_new, &e, &y, &fine, &tol);
                if err.is_finite() && err <= 1.0 {
                    let e_fr = (sys.c * e[0] - e[1]) / r_new;
                    r = r_new;
                    y = fine;
                    stats.accepted += 1;
                    let factor = (0.9 * err.max(1e-10).powf(-1.0 / 6.0)).clamp(0.2, 4.0);
                    if !on_target || factor < 1.0 {
                        h = step * factor;
                    }
                    let acc = Accepted {
                        r,
                        y,
                        local_error: e[0].abs().max(r * e_fr.abs()),
                        on_target: on_target && !native,
                    };
                    if on_target && !native {
                        next_target += 1;
                    }
                    if let Flow::Stop = on_step(&acc)? {
                        return Ok(stats);
                    }
                } else {
                    stats.rejected += 1;
                    let f = if err.is_finite() { (0.9 * err.powf(-1.0 / 6.0)).clamp(0.1, 0.9) } else { 0.25 };
                    h = step * f;
                }
            }
        }
    }
    Ok(stats)
}
