//! Power-series solution of the profile equation at the origin.
//!
//! Writing `f = sum a_k r^k`, `w = r fr - f` and
//! `U = sum k(k+n-2) a_k r^(k-2) + (n-1) fr^3 / r`, the equation multiplied
//! by `r lambda w` reads `lambda w U = (1 + fr^2)^2`. Matching the
//! coefficient of `r^m` determines `a_(m+2)` from lower coefficients, since
//! `w_0 = |mu| > 0`.

use std::ops::{Add, Div, Mul, Neg, Sub};

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::params::Parameters;

/// Arithmetic needed by the coefficient recursion.
pub trait SeriesScalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl SeriesScalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl SeriesScalar for TwoFloat {
    fn from_f64(v: f64) -> Self {
        TwoFloat::from(v)
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

fn cauchy<T: SeriesScalar>(a: &[T], b: &[T], m: usize) -> T {
    let mut s = T::from_f64(0.0);
    for j in 0..=m {
        if j < a.len() && m - j < b.len() {
            s = s + a[j] * b[m - j];
        }
    }
    s
}

/// Coefficients `a_0..=a_order` in the scalar type `T`.
pub fn coefficients<T: SeriesScalar>(params: &Parameters, order: usize) -> Vec<T> {
    let zero = T::from_f64(0.0);
    let one = T::from_f64(1.0);
    let lambda = T::from_f64(params.lambda());
    let n = params.n() as usize;
    let n1 = T::from_f64((n - 1) as f64);
    let mu = T::from_f64(params.mu());
    let w0 = -mu;

    let mut a = vec![zero; order + 1];
    a[0] = mu;
    if order >= 2 {
        a[2] = one / (T::from_f64((2 * n) as f64) * lambda * w0);
    }
    // fr = sum p_j r^j with p_j = (j+1) a_(j+1)
    let deriv = |a: &[T], upto: usize| -> Vec<T> {
        (0..upto).map(|j| T::from_f64((j + 1) as f64) * a[j + 1]).collect()
    };
    for m in 1..order.saturating_sub(1) {
        // lower coefficients a_0..=a_(m+1) are final
        let p = deriv(&a, m + 2);
        let p2: Vec<T> = (0..=m).map(|k| cauchy(&p, &p, k)).collect();
        // (1 + fr^2)^2 = 1 + 2 fr^2 + fr^4
        let rhs_m = T::from_f64(2.0) * p2[m] + cauchy(&p2, &p2, m) + if m == 0 { one } else { zero };
        // fr^3 / r: coefficient of r^m in fr^3 is at r^(m+1)
        let p3m = {
            let mut s = zero;
            for j in 0..=m + 1 {
                if j < p.len() && m + 1 - j < p2.len() {
                    s = s + p[j] * p2[m + 1 - j];
                }
            }
            s
        };
        // w_j = (j - 1) a_j, U_k = (k+2)(k+n) a_(k+2) + (n-1)[fr^3/r]_k
        let u = |k: usize, pk3: T| T::from_f64(((k + 2) * (k + n)) as f64) * a[k + 2] + n1 * pk3;
        let mut known = zero;
        for j in 1..=m {
            let wj = T::from_f64(j as f64 - 1.0) * a[j];
            let k = m - j;
            let pk3 = {
                let mut s = zero;
                for i in 0..=k + 1 {
                    if i < p.len() && k + 1 - i < p2.len() {
                        s = s + p[i] * p2[k + 1 - i];
                    }
                }
                s
            };
            known = known + wj * u(k, pk3);
        }
        let coeff = T::from_f64(((m + 2) * (m + n)) as f64);
        a[m + 2] = (rhs_m / lambda - known - w0 * n1 * p3m) / (w0 * coeff);
    }
    a
}

/// Coefficients of `f(r) = sum a_k r^k` near the origin, in double precision.
pub fn taylor_bootstrap(params: &Parameters, order: usize) -> Result<Vec<f64>> {
    if order < 2 {
        return Err(Error::Config(format!("series order {order} must be at least 2")));
    }
    Ok(coefficients::<f64>(params, order))
}

/// Heuristic convergence radius in `r` from the last nonzero even
/// coefficients, `|a_k / a_(k+2)|^(1/2)`. `None` when the tail is zero.
/// A coefficient far below both even neighbours (an isolated near-zero,
/// such as a cancelled `a_4`) is skipped.
pub fn radius_estimate(coeffs: &[f64]) -> Option<f64> {
    let evens: Vec<(usize, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(k, c)| k % 2 == 0 && **c != 0.0)
        .map(|(k, c)| (k, *c))
        .collect();
    let negligible = |i: usize| {
        let c = evens[i].1.abs();
        let prev = i.checked_sub(1).map(|j| evens[j].1.abs());
        let next = evens.get(i + 1).map(|e| e.1.abs());
        match (prev, next) {
            (Some(a), Some(b)) => c < 1e-10 * a.min(b),
            _ => false,
        }
    };
    let kept: Vec<(usize, f64)> = (0..evens.len()).filter(|&i| !negligible(i)).map(|i| evens[i]).collect();
    let tail = &kept[kept.len().saturating_sub(4)..];
    if tail.len() < 2 {
        return None;
    }
    tail.windows(2)
        .filter(|w| w[0].0 >= 2)
        .map(|w| (w[0].1 / w[1].1).abs().powf(1.0 / (w[1].0 - w[0].0) as f64))
        .reduce(f64::min)
}

/// Horner evaluation of the series and its derivative.
pub fn evaluate<T: SeriesScalar>(coeffs: &[T], r: T) -> (T, T) {
    let zero = T::from_f64(0.0);
    let mut f = zero;
    let mut fr = zero;
    for (k, &c) in coeffs.iter().enumerate().rev() {
        f = f * r + c;
        if k > 0 {
            fr = fr * r + T::from_f64(k as f64) * c;
        }
    }
    (f, fr)
}
