//! Independent checks of a computed profile.
//!
//! None of these reuse the construction they check: the ODE scan
//! differentiates the stored slope numerically, the identities integrate
//! the profile on its own grid, and the Taylor oracle works in double-double
//! arithmetic from the series recursion alone.

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::params::{ode_rhs, Parameters};
use crate::profile::{ProfilePoint, RadialProfile};
use crate::quadrature::cumulative_simpson;
use crate::series::{coefficients, evaluate, radius_estimate, SeriesScalar};

/// Three-point derivative weights on a nonuniform stencil, at the middle node.
fn centred_weights(h0: f64, h1: f64) -> [f64; 3] {
    [-h1 / (h0 * (h0 + h1)), (h1 - h0) / (h0 * h1), h0 / (h1 * (h0 + h1))]
}

/// Pointwise defect between stored `frr` and the profile equation.
pub fn stored_frr_defect(params: &Parameters, p: &ProfilePoint) -> Result<f64> {
    Ok((p.frr - ode_rhs(params, p.r, p.f, p.fr)?).abs())
}

/// Result of the finite-difference scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualScan {
    /// Largest `max(|D fr - rhs|, |D^2 f - rhs|)` over interior nodes, divided
    /// by `max(1, |rhs|)` or by the rounding floor of `rhs` when that is larger.
    pub max_scaled: f64,
    /// Largest absolute defect.
    pub max_abs: f64,
    /// Radius of the largest scaled defect.
    pub at_r: f64,
}

/// Second-derivative weights on a nonuniform stencil, at the middle node.
fn second_weights(h0: f64, h1: f64) -> [f64; 3] {
    [2.0 / (h0 * (h0 + h1)), -2.0 / (h0 * h1), 2.0 / (h1 * (h0 + h1))]
}

/// Uncertainty of `ode_rhs` caused by rounding of the stored `(f, fr)`.
/// The two terms of the equation cancel as `q` approaches its limit, so
/// far out this exceeds `|frr|` itself.
fn rounding_floor(params: &Parameters, p: &ProfilePoint) -> f64 {
    let s = 1.0 + p.fr * p.fr;
    let t1 = s * s / (params.lambda() * p.w());
    let t2 = (params.nf() - 1.0) * s * p.fr / p.r;
    1e3 * f64::EPSILON * (t1.abs() + t2.abs())
}

/// Recomputes `frr` by centred differences of the stored `fr` and of the
/// stored `f`, and compares both with the profile equation evaluated from
/// `(r, f, fr)`. The larger of the two defects is kept per node.
pub fn ode_residual_scan(profile: &RadialProfile) -> Result<ResidualScan> {
    let pts = profile.points();
    let params = profile.params();
    let mut scan = ResidualScan {
        max_scaled: 0.0,
        max_abs: 0.0,
        at_r: 0.0,
    };
    for i in 1..pts.len().saturating_sub(1) {
        let (a, b, c) = (&pts[i - 1], &pts[i], &pts[i + 1]);
        let (h0, h1) = (b.r - a.r, c.r - b.r);
        let wts = centred_weights(h0, h1);
        let dfr = wts[0] * a.fr + wts[1] * b.fr + wts[2] * c.fr;
        let w2 = second_weights(h0, h1);
        let d2f = w2[0] * a.f + w2[1] * b.f + w2[2] * c.f;
        let rhs = ode_rhs(params, b.r, b.f, b.fr)?;
        let d = (dfr - rhs).abs().max((d2f - rhs).abs());
        let scaled = d / rhs.abs().max(1.0).max(rounding_floor(params, b));
        scan.max_abs = scan.max_abs.max(d);
        if scaled > scan.max_scaled {
            scan.max_scaled = scaled;
            scan.at_r = b.r;
        }
    }
    Ok(scan)
}

/// Profile nodes with `r_i < r` followed by the evaluated point at `r`.
fn nodes_up_to(profile: &RadialProfile, r: f64) -> Result<Vec<ProfilePoint>> {
    let end = profile.eval(r)?;
    let mut pts: Vec<ProfilePoint> = profile.points().iter().take_while(|p| p.r < r).copied().collect();
    pts.push(end);
    Ok(pts)
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::SingularRadius(r));
    }
    Ok(())
}

/// Both sides of
/// `r fr + (n-2) int_0^r fr = (1/lambda) int_0^r s (1+fr^2)^2 / w - (n-1) int_0^r fr^3`.
pub fn integral_identity_sides(profile: &RadialProfile, r: f64) -> Result<(f64, f64)> {
    check_radius(r)?;
    let params = profile.params();
    let pts = nodes_up_to(profile, r)?;
    let x: Vec<f64> = pts.iter().map(|p| p.r).collect();
    let fr: Vec<f64> = pts.iter().map(|p| p.fr).collect();
    let cube: Vec<f64> = fr.iter().map(|v| v * v * v).collect();
    let mut frac = Vec::with_capacity(pts.len());
    for p in &pts {
        let w = p.w();
        if !(w > 0.0) {
            return Err(Error::SingularDenominator { r: p.r, w });
        }
        let s = 1.0 + p.fr * p.fr;
        frac.push(p.r * s * s / w);
    }
    let int = |y: &[f64]| *cumulative_simpson(&x, y).last().expect("nonempty grid");
    let n = params.nf();
    let last = pts.last().expect("nonempty grid");
    let lhs = last.r * last.fr + (n - 2.0) * int(&fr);
    let rhs = int(&frac) / params.lambda() - (n - 1.0) * int(&cube);
    Ok((lhs, rhs))
}

/// `|LHS - RHS|` of the integral identity at `r`.
pub fn integral_identity_defect(profile: &RadialProfile, r: f64) -> Result<f64> {
    let (lhs, rhs) = integral_identity_sides(profile, r)?;
    Ok((lhs - rhs).abs())
}

/// Exponent `L(s) = (n-1) int_0^s fr^2 / t dt` on the given nodes.
fn log_factor(n: f64, pts: &[ProfilePoint]) -> Vec<f64> {
    let x: Vec<f64> = pts.iter().map(|p| p.r).collect();
    let y: Vec<f64> = pts
        .iter()
        .map(|p| if p.r > 0.0 { p.fr * p.fr / p.r } else { 0.0 })
        .collect();
    cumulative_simpson(&x, &y).into_iter().map(|v| (n - 1.0) * v).collect()
}

/// `h(r) = r^(n-1) exp((n-1) int_0^r fr^2 / s ds)` from the profile grid.
pub fn integrating_factor(profile: &RadialProfile, r: f64) -> Result<f64> {
    check_radius(r)?;
    let pts = nodes_up_to(profile, r)?;
    let n = profile.params().nf();
    let l = *log_factor(n, &pts).last().expect("nonempty grid");
    Ok(r.powf(n - 1.0) * l.exp())
}

/// `fr(r)` rebuilt as `(1/(lambda h(r))) int_0^r h (1+fr^2)^2 / w`.
/// The ratio `h(s)/h(r)` is formed in the log domain.
pub fn integrating_factor_representation(profile: &RadialProfile, r: f64) -> Result<f64> {
    check_radius(r)?;
    let params = profile.params();
    let n = params.nf();
    let pts = nodes_up_to(profile, r)?;
    let l = log_factor(n, &pts);
    let l_end = *l.last().expect("nonempty grid");
    let x: Vec<f64> = pts.iter().map(|p| p.r).collect();
    let mut y = Vec::with_capacity(pts.len());
    for (p, ls) in pts.iter().zip(&l) {
        let w = p.w();
        if !(w > 0.0) {
            return Err(Error::SingularDenominator { r: p.r, w });
        }
        let s = 1.0 + p.fr * p.fr;
        let ratio = (p.r / r).powf(n - 1.0) * (ls - l_end).exp();
        y.push(ratio * s * s / w);
    }
    Ok(*cumulative_simpson(&x, &y).last().expect("nonempty grid") / params.lambda())
}

/// Whether the kernel `exp(L(s) - L(r))` of the representation decays
/// slowly enough near `s = r` to be integrated on the profile grid.
pub fn integrating_factor_resolved(profile: &RadialProfile, r: f64) -> Result<bool> {
    check_radius(r)?;
    let pts = profile.points();
    let i = pts.partition_point(|p| p.r < r).clamp(1, pts.len() - 1);
    let spacing = pts[i].r - pts[i - 1].r;
    let fr = profile.eval(r)?.fr;
    let rate = (profile.params().nf() - 1.0) * fr * fr / r;
    Ok(rate * spacing <= FACTOR_KERNEL_STEPS)
}

/// Largest kernel decay per grid step accepted by [`integrating_factor_resolved`].
const FACTOR_KERNEL_STEPS: f64 = 0.02;

/// `|fr(r) - representation|`.
pub fn integrating_factor_defect(profile: &RadialProfile, r: f64) -> Result<f64> {
    let rebuilt = integrating_factor_representation(profile, r)?;
    Ok((profile.eval(r)?.fr - rebuilt).abs())
}

/// `u(x, t) = e^{lambda t} f(e^{-lambda t} |x|)`.
#[derive(Debug, Clone)]
pub struct SelfSimilarSolution {
    pub profile: RadialProfile,
    pub lambda: f64,
}

/// Terms of the graph equation at one spacetime point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeTerms {
    pub xi: f64,
    pub u_t: f64,
    /// `div(grad u / sqrt(1 + |grad u|^2))`.
    pub divergence: f64,
    /// `u_t + sqrt(1 + |grad u|^2) / divergence`.
    pub residual: f64,
}

impl SelfSimilarSolution {
    pub fn new(profile: RadialProfile) -> Self {
        let lambda = profile.params().lambda();
        SelfSimilarSolution { profile, lambda }
    }

    pub fn u(&self, rho: f64, t: f64) -> Result<f64> {
        let scale = (self.lambda * t).exp();
        Ok(scale * self.profile.eval(rho / scale)?.f)
    }

    /// Evaluates the graph equation at radius `rho` and time `t`.
    pub fn terms(&self, rho: f64, t: f64) -> Result<PdeTerms> {
        let grow = (self.lambda * t).exp();
        let xi = rho / grow;
        check_radius(xi)?;
        let p = self.profile.eval(xi)?;
        let n = self.profile.params().nf();
        let s = 1.0 + p.fr * p.fr;
        let curv = p.frr / s.powf(1.5);
        let radial = (n - 1.0) * p.fr / (xi * s.sqrt());
        let divergence = (curv + radial) / grow;
        if !(divergence.abs() > 1e3 * f64::EPSILON * (curv.abs() + radial.abs()) / grow) {
            return Err(Error::VanishingMeanCurvature { xi, value: divergence });
        }
        let u_t = -self.lambda * grow * p.w();
        Ok(PdeTerms {
            xi,
            u_t,
            divergence,
            residual: u_t + s.sqrt() / divergence,
        })
    }
}

/// `|u_t + sqrt(1+|grad u|^2) / div(...)|` at `(rho, t)`.
pub fn pde_residual(solution: &SelfSimilarSolution, rho: f64, t: f64) -> Result<f64> {
    Ok(solution.terms(rho, t)?.residual.abs())
}

/// Working precision of the series oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Double,
    DoubleDouble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    pub f: f64,
    pub fr: f64,
    /// Size of the last retained terms of `f` and `fr`.
    pub truncation_bound: f64,
    pub radius_estimate: f64,
}

/// Largest admissible `r_probe` as a fraction of the estimated radius.
const ORACLE_RADIUS_FRACTION: f64 = 0.5;

fn oracle_in<T: SeriesScalar>(params: &Parameters, r: f64, order: usize) -> (f64, f64, Vec<f64>) {
    let coeffs = coefficients::<T>(params, order);
    let (f, fr) = evaluate(&coeffs, T::from_f64(r));
    (f.to_f64(), fr.to_f64(), coeffs.iter().map(|c| c.to_f64()).collect())
}

/// Series value of `(f, fr)` at a small radius.
pub fn taylor_oracle(params: &Parameters, r_probe: f64, order: usize, precision: Precision) -> Result<OracleValue> {
    if order < 8 {
        return Err(Error::Config(format!("oracle order {order} must be at least 8")));
    }
    if !(r_probe >= 0.0) {
        return Err(Error::SingularRadius(r_probe));
    }
    let (f, fr, coeffs) = match precision {
        Precision::Double => oracle_in::<f64>(params, r_probe, order),
        Precision::DoubleDouble => oracle_in::<TwoFloat>(params, r_probe, order),
    };
    let radius = radius_estimate(&coeffs).unwrap_or(f64::INFINITY);
    if r_probe > ORACLE_RADIUS_FRACTION * radius {
        return Err(Error::SeriesDivergence { r_probe, radius });
    }
    let (k, ak) = coeffs
        .iter()
        .enumerate()
        .rev()
        .find(|(_, c)| **c != 0.0)
        .map(|(k, c)| (k, *c))
        .unwrap_or((0, 0.0));
    let term_f = (ak * r_probe.powi(k as i32)).abs();
    let term_fr = (k as f64 * ak * r_probe.powi(k as i32 - 1)).abs();
    Ok(OracleValue {
        f,
        fr,
        truncation_bound: term_f.max(term_fr),
        radius_estimate: radius,
    })
}

/// Richardson extrapolation of `fr(r)/r` to `r = 0`, eliminating even
/// powers of `r` from samples at `r0, r0/2, ..., r0/2^levels`.
pub fn extrapolate_origin_curvature(profile: &RadialProfile, r0: f64, levels: usize) -> Result<f64> {
    let mut table: Vec<f64> = (0..=levels)
        .map(|k| {
            let r = r0 / 2f64.powi(k as i32);
            profile.eval(r).map(|p| p.fr / r)
        })
        .collect::<Result<_>>()?;
    for j in 1..=levels {
        let factor = 4f64.powi(j as i32);
        for i in (j..=levels).rev() {
            table[i] = (factor * table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    Ok(table[levels])
}

/// Pass thresholds for the report. All compared quantities are scaled by
/// `max(1, magnitude)` so that they read as relative errors at large `r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyTolerances {
    pub ode_residual: f64,
    pub integral_identity: f64,
    pub integrating_factor: f64,
    pub pde_residual: f64,
    pub oracle: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        VerifyTolerances {
            ode_residual: 1e-2,
            integral_identity: 1e-8,
            integrating_factor: 1e-7,
            pde_residual: 1e-7,
            oracle: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassFlags {
    pub ode_residual: bool,
    pub integral_identity: bool,
    pub integrating_factor: bool,
    pub pde_residual: bool,
    pub oracle: bool,
}

impl PassFlags {
    pub fn all(&self) -> bool {
        self.ode_residual && self.integral_identity && self.integrating_factor && self.pde_residual && self.oracle
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ode_residual_max: f64,
    pub ode_residual_at_r: f64,
    pub integral_identity_defect_max: f64,
    pub integrating_factor_defect_max: f64,
    pub pde_residual_max: f64,
    pub oracle_mismatch_at_probe: f64,
    pub oracle_probe: f64,
    pub probe_radii: Vec<f64>,
    /// Probes where the integrating-factor kernel is resolved by the grid.
    pub integrating_factor_probes: Vec<f64>,
    pub grids_used: String,
    pub tolerances: VerifyTolerances,
    pub pass: PassFlags,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.pass.all()
    }
}

/// Series order used by the report's oracle comparison.
pub const ORACLE_ORDER: usize = 24;

/// Oracle probe radius: inside the first profile segment and well within
/// the series radius.
pub fn default_oracle_probe(profile: &RadialProfile) -> f64 {
    let first_end = profile
        .segments()
        .first()
        .map(|s| profile.points()[s.end - 1].r)
        .unwrap_or(profile.r_max());
    0.05f64.min(0.5 * first_end)
}

/// Default probe radii inside `(0, r_max]`. Beyond a few units the
/// identity integrands cancel to a level set by quadrature error rather
/// than by solution error.
pub fn default_probe_radii(profile: &RadialProfile) -> Vec<f64> {
    let r_max = profile.r_max();
    let mut probes: Vec<f64> = [0.25, 0.5, 1.0, 2.0].into_iter().filter(|r| *r <= r_max).collect();
    if probes.is_empty() {
        probes.push(0.5 * r_max);
    }
    probes
}

/// Runs every check; `probes` are the radii for the integral identities
/// and the spacetime residual (at `t = 0` and `t = 1`).
pub fn verify_profile(profile: &RadialProfile, probes: &[f64], tolerances: VerifyTolerances) -> Result<VerificationReport> {
    let probes: Vec<f64> = probes
        .iter()
        .copied()
        .filter(|r| *r > 0.0 && *r <= profile.r_max())
        .collect();
    if probes.is_empty() {
        return Err(Error::Config("no probe radius inside (0, r_max]".into()));
    }
    let params = *profile.params();

    let (scan, identity, factor, pde, oracle) = std::thread::scope(|s| {
        let scan = s.spawn(|| ode_residual_scan(profile));
        let identity = s.spawn(|| -> Result<f64> {
            let mut worst = 0.0f64;
            for &r in &probes {
                let (lhs, rhs) = integral_identity_sides(profile, r)?;
                worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
            }
            Ok(worst)
        });
        let factor = s.spawn(|| -> Result<(f64, Vec<f64>)> {
            let mut worst = 0.0f64;
            let mut used = Vec::new();
            for &r in &probes {
                if !integrating_factor_resolved(profile, r)? {
                    continue;
                }
                let fr = profile.eval(r)?.fr;
                worst = worst.max(integrating_factor_defect(profile, r)? / fr.abs().max(1.0));
                used.push(r);
            }
            if used.is_empty() {
                worst = f64::NAN;
            }
            Ok((worst, used))
        });
        let pde = s.spawn(|| -> Result<f64> {
            let sol = SelfSimilarSolution::new(profile.clone());
            let mut worst = 0.0f64;
            for &r in &probes {
                for t in [0.0, 1.0] {
                    let rho = r * (sol.lambda * t).exp();
                    let terms = sol.terms(rho, t)?;
                    worst = worst.max(terms.residual.abs() / terms.u_t.abs().max(1.0));
                }
            }
            Ok(worst)
        });
        let oracle = s.spawn(|| -> Result<(f64, f64)> {
            let r = default_oracle_probe(profile);
            let o = taylor_oracle(&params, r, ORACLE_ORDER, Precision::DoubleDouble)?;
            let p = profile.eval(r)?;
            Ok(((p.f - o.f).abs().max((p.fr - o.fr).abs()), r))
        });
        (
            scan.join().expect("scan thread"),
            identity.join().expect("identity thread"),
            factor.join().expect("factor thread"),
            pde.join().expect("pde thread"),
            oracle.join().expect("oracle thread"),
        )
    });
    let scan = scan?;
    let identity = identity?;
    let (factor, factor_probes) = factor?;
    let pde = pde?;
    let (oracle, oracle_probe) = oracle?;

    let segs: Vec<String> = profile
        .segments()
        .iter()
        .map(|s| {
            let pts = profile.points();
            format!("{:?}[{}..{}] r in [{}, {}]", s.provenance, s.start, s.end, pts[s.start].r, pts[s.end - 1].r)
        })
        .collect();
    Ok(VerificationReport {
        ode_residual_max: scan.max_scaled,
        ode_residual_at_r: scan.at_r,
        integral_identity_defect_max: identity,
        integrating_factor_defect_max: factor,
        pde_residual_max: pde,
        oracle_mismatch_at_probe: oracle,
        oracle_probe,
        probe_radii: probes,
        integrating_factor_probes: factor_probes,
        grids_used: format!("{} nodes: {}", profile.points().len(), segs.join("; ")),
        tolerances,
        pass: PassFlags {
            ode_residual: scan.max_scaled <= tolerances.ode_residual,
            integral_identity: identity <= tolerances.integral_identity,
            integrating_factor: factor <= tolerances.integrating_factor,
            pde_residual: pde <= tolerances.pde_residual,
            oracle: oracle <= tolerances.oracle,
        },
    })
}
