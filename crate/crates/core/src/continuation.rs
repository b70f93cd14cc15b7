//! Continuation of the origin profile out to `r_max`.
//!
//! Two methods: an adaptive integrator (the default) and the interior
//! fixed-point map, applied window by window. Both check the structural
//! invariants `w > 0`, `fr > 0`, `frr > 0` as they go.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{march, Flow, SplitSystem, Tolerance};
use crate::origin::{grid_intervals, tail_ratio, PicardDiagnostics};
use crate::params::{ode_rhs, OutputGrid, Parameters, SolverConfig};
use crate::profile::{ProfilePoint, Provenance, RadialProfile};
use crate::quadrature::cumulative_simpson_uniform;

/// How invariant violations are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Requires `lambda (n-1) > 1`; the first violation stops the march.
    #[default]
    Certified,
    /// Any `lambda > 0`; violations are recorded and the march continues
    /// while it can.
    Exploratory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    WNonpositive,
    FrNonpositive,
    FrrNonpositive,
    StepUnderflow,
}

impl MonitorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MonitorKind::WNonpositive => "w_nonpositive",
            MonitorKind::FrNonpositive => "fr_nonpositive",
            MonitorKind::FrrNonpositive => "frr_nonpositive",
            MonitorKind::StepUnderflow => "step_underflow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorEvent {
    pub kind: MonitorKind,
    pub r: f64,
    pub f: f64,
    pub fr: f64,
    pub frr: f64,
    pub w: f64,
}

impl MonitorEvent {
    fn at(kind: MonitorKind, p: &ProfilePoint) -> Self {
        MonitorEvent {
            kind,
            r: p.r,
            f: p.f,
            fr: p.fr,
            frr: p.frr,
            w: p.w(),
        }
    }
}

impl fmt::Display for MonitorEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at r = {} (f = {:e}, fr = {:e}, frr = {:e}, w = {:e})",
            self.kind.as_str(),
            self.r,
            self.f,
            self.fr,
            self.frr,
            self.w
        )
    }
}

/// Violations at one node, in the order w, fr, frr.
fn violations(p: &ProfilePoint) -> Vec<MonitorKind> {
    let mut out = Vec::new();
    if !(p.w() > 0.0) {
        out.push(MonitorKind::WNonpositive);
    }
    if !(p.fr > 0.0) {
        out.push(MonitorKind::FrNonpositive);
    }
    if !(p.frr > 0.0) {
        out.push(MonitorKind::FrrNonpositive);
    }
    out
}

/// Every violation of `w > 0`, `fr > 0`, `frr > 0` at nodes with `r > 0`.
/// An empty result is the pass certificate.
pub fn detect_breakdown(_params: &Parameters, profile: &RadialProfile) -> Vec<MonitorEvent> {
    profile
        .points()
        .iter()
        .filter(|p| p.r > 0.0)
        .flat_map(|p| violations(p).into_iter().map(move |k| MonitorEvent::at(k, p)))
        .collect()
}

/// Output radii in `(r_start, r_max]`; `r_max` is always included.
pub fn output_radii(grid: &OutputGrid, r_start: f64, r_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    match *grid {
        OutputGrid::Uniform { spacing } => {
            let mut k = (r_start / spacing).floor() as u64 + 1;
            loop {
                let r = k as f64 * spacing;
                if r >= r_max {
                    break;
                }
                if r > r_start {
                    out.push(r);
                }
                k += 1;
            }
        }
        OutputGrid::Log { per_decade } => {
            let pd = f64::from(per_decade);
            let mut k = (r_start.log10() * pd).floor() as i64 + 1;
            loop {
                let r = 10f64.powf(k as f64 / pd);
                if r >= r_max {
                    break;
                }
                if r > r_start {
                    out.push(r);
                }
                k += 1;
            }
        }
        OutputGrid::AdaptiveNative => {}
    }
    // drop a node that would leave a sliver before r_max
    if let Some(&last) = out.last() {
        if r_max - last < 1e-9 * r_max {
            out.pop();
        }
    }
    if r_max > r_start {
        out.push(r_max);
    }
    out
}

/// Result of an integrator continuation.
#[derive(Debug, Clone)]
pub struct Extension {
    pub profile: RadialProfile,
    pub events: Vec<MonitorEvent>,
    /// Estimated global error in `f` at the last node.
    pub error_estimate: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Radius where the integrator switched to the implicit method.
    pub stiff_switch_r: Option<f64>,
    /// False when the march stopped before `r_max`.
    pub completed: bool,
}

/// Integrates from the last node of `profile` to `config.r_max`.
///
/// In certified mode the march stops at the first invariant violation; in
/// exploratory mode violations are recorded once per crossing. Step
/// underflow ends the march in both modes and is reported as an event.
pub fn extend_rk(params: &Parameters, profile: &RadialProfile, config: &SolverConfig, mode: Mode) -> Result<Extension> {
    if mode == Mode::Certified {
        params.require_global()?;
    }
    config.validate()?;
    let start = *profile.last();
    let unchanged = |profile: &RadialProfile| Extension {
        profile: profile.clone(),
        events: Vec::new(),
        error_estimate: 0.0,
        accepted_steps: 0,
        rejected_steps: 0,
        stiff_switch_r: None,
        completed: true,
    };
    if config.r_max <= start.r {
        return Ok(unchanged(profile));
    }
    if !(start.r > 0.0) {
        return Err(Error::InvalidProfile("continuation needs a profile with r_max > 0".into()));
    }
    if !(start.w() > 0.0) {
        return Err(Error::SingularDenominator { r: start.r, w: start.w() });
    }

    let sys = SplitSystem::new(params);
    let native = matches!(config.output_grid, OutputGrid::AdaptiveNative);
    let targets = output_radii(&config.output_grid, start.r, config.r_max);
    let tol = Tolerance {
        abs: config.abs_tol,
        rel: config.rel_tol,
    };

    let mut tail: Vec<ProfilePoint> = Vec::with_capacity(targets.len() + 1);
    tail.push(start);
    let mut events = Vec::new();
    let mut local: Vec<(f64, f64)> = Vec::new();
    let mut prev_ok = [start.w() > 0.0, start.fr > 0.0, start.frr > 0.0];
    let mut stopped = false;

    let outcome = march(&sys, start.r, sys.to_split(start.r, start.f, start.fr), &targets, native, tol, |acc| {
        let p = sys.point(acc.r, &acc.y)?;
        local.push((acc.local_error, p.f));
        let ok = [p.w() > 0.0, p.fr > 0.0, p.frr > 0.0];
        let kinds = [MonitorKind::WNonpositive, MonitorKind::FrNonpositive, MonitorKind::FrrNonpositive];
        let mut fresh = false;
        for i in 0..3 {
            if prev_ok[i] && !ok[i] {
                events.push(MonitorEvent::at(kinds[i], &p));
                fresh = true;
            }
        }
        prev_ok = ok;
        if acc.on_target || native {
            tail.push(p);
        }
        if fresh && mode == Mode::Certified {
            if !(acc.on_target || native) {
                tail.push(p);
            }
            stopped = true;
            return Ok(Flow::Stop);
        }
        Ok(Flow::Continue)
    });

    let stats = match outcome {
        Ok(stats) => Some(stats),
        Err(Error::StepUnderflow { r, h: _ }) => {
            let last = *tail.last().expect("start node present");
            let mut ev = MonitorEvent::at(MonitorKind::StepUnderflow, &last);
            ev.r = r;
            events.push(ev);
            stopped = true;
            None
        }
        Err(e) => return Err(e),
    };

    let f_end = tail.last().map(|p| p.f).unwrap_or(start.f);
    let scale = |f: f64| (f_end.abs() + params.mu().abs()) / (f.abs() + params.mu().abs());
    // the starting value carries the origin construction's tolerance
    let mut error_estimate = config.abs_tol * scale(start.f);
    for (e, f) in &local {
        error_estimate += e * scale(*f);
    }

    let profile = profile.append(&tail, Provenance::Integrator)?;
    let (accepted_steps, rejected_steps, stiff_switch_r) = stats
        .map(|s| (s.accepted, s.rejected, s.stiff_switch_r))
        .unwrap_or((local.len(), 0, None));
    Ok(Extension {
        profile,
        events,
        error_estimate,
        accepted_steps,
        rejected_steps,
        stiff_switch_r,
        completed: !stopped,
    })
}

/// Left endpoint data for one interior fixed-point window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionWindow {
    pub r1: f64,
    pub a0: f64,
    pub b0: f64,
    /// Lower bound on `r1 b0 - a0`.
    pub a1: f64,
    pub delta: f64,
}

impl ExtensionWindow {
    /// Window at `(r1, a0, b0)` with `a1 = r1 b0 - a0` and the adaptive
    /// width `min(1/3, a1 / (4 (M + r1 + 1)))`, `M = max(|a0|, |b0|)`.
    pub fn new(r1: f64, a0: f64, b0: f64) -> Result<Self> {
        let a1 = r1 * b0 - a0;
        if !(r1 > 0.0) {
            return Err(Error::SingularRadius(r1));
        }
        if !(a1 > 0.0) {
            return Err(Error::SingularDenominator { r: r1, w: a1 });
        }
        let m = a0.abs().max(b0.abs());
        Ok(ExtensionWindow {
            r1,
            a0,
            b0,
            a1,
            delta: (1.0 / 3.0f64).min(a1 / (4.0 * (m + r1 + 1.0))),
        })
    }

    fn check(&self) -> Result<()> {
        if !(self.a1 > 0.0) || !(self.r1 * self.b0 - self.a0 >= self.a1) {
            return Err(Error::Config(format!(
                "window requires r1*b0 - a0 >= a1 > 0 (r1 = {}, a0 = {}, b0 = {}, a1 = {})",
                self.r1, self.a0, self.b0, self.a1
            )));
        }
        if !(self.delta > 0.0) {
            return Err(Error::Config("window width must be positive".into()));
        }
        Ok(())
    }
}

/// Guard on the observed contraction of the interior map.
pub const INTERIOR_CONTRACTION: f64 = 1.0 / 3.0;
const TRANSIENT_RATIOS: usize = 2;
const MAX_WINDOW_HALVINGS: usize = 30;

/// One application of the interior map on a uniform grid starting at `r1`.
pub fn interior_phi(params: &Parameters, window: &ExtensionWindow, grid: &[f64], g: &[f64], h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let ds = grid[1] - grid[0];
    let lambda = params.lambda();
    let n = params.nf();
    let mut frac = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let den = grid[i] * h[i] - g[i];
        if !(den > 0.0) {
            return Err(Error::DenominatorCollapse { s: grid[i], value: den });
        }
        let p = 1.0 + h[i] * h[i];
        frac.push(grid[i] * p * p / den);
    }
    let cube: Vec<f64> = h.iter().map(|v| v * v * v).collect();
    let int_frac = cumulative_simpson_uniform(ds, &frac);
    let int_cube = cumulative_simpson_uniform(ds, &cube);
    let int_h = cumulative_simpson_uniform(ds, h);
    let g_new = int_h.iter().map(|v| window.a0 + v).collect();
    let h_new = (0..grid.len())
        .map(|i| {
            let r = grid[i];
            ((int_frac[i] / lambda - (n - 1.0) * int_cube[i] - (n - 2.0) * int_h[i]) + window.r1 * window.b0) / r
        })
        .collect();
    Ok((g_new, h_new))
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Converged fixed point on one window.
#[derive(Debug, Clone)]
pub struct PicardSegment {
    pub window: ExtensionWindow,
    pub grid: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub diagnostics: PicardDiagnostics,
}

impl PicardSegment {
    /// Nodes of the segment, thinned to about `keep` intervals, always
    /// including both ends.
    pub fn points(&self, params: &Parameters, keep: usize) -> Result<Vec<ProfilePoint>> {
        let n = self.grid.len() - 1;
        let stride = (n / keep.max(1)).max(1);
        let mut out = Vec::new();
        for i in (0..=n).filter(|i| i % stride == 0 || *i == n) {
            let (r, f, fr) = (self.grid[i], self.g[i], self.h[i]);
            out.push(ProfilePoint {
                r,
                f,
                fr,
                frr: ode_rhs(params, r, f, fr)?,
            });
        }
        Ok(out)
    }
}

enum WindowAttempt {
    Done(PicardSegment),
    Shrink,
}

fn window_attempt(params: &Parameters, window: &ExtensionWindow, config: &SolverConfig, restarts: usize) -> Result<WindowAttempt> {
    let intervals = grid_intervals(window.delta, config.abs_tol);
    let grid: Vec<f64> = (0..=intervals)
        .map(|i| window.r1 + window.delta * i as f64 / intervals as f64)
        .collect();
    let mut g = vec![window.a0; grid.len()];
    let mut h = vec![window.b0; grid.len()];
    let mut distances = Vec::new();
    let mut min_den = f64::INFINITY;
    for it in 1..=config.picard_max_iter {
        let (g_new, h_new) = match interior_phi(params, window, &grid, &g, &h) {
            Ok(v) => v,
            Err(Error::DenominatorCollapse { .. }) => return Ok(WindowAttempt::Shrink),
            Err(e) => return Err(e),
        };
        let lower = grid
            .iter()
            .zip(g_new.iter().zip(&h_new))
            .map(|(s, (g, h))| s * h - g)
            .fold(f64::INFINITY, f64::min);
        min_den = min_den.min(lower);
        if lower < window.a1 / 2.0 {
            return Ok(WindowAttempt::Shrink);
        }
        let d = sup_distance(&g_new, &g).max(sup_distance(&h_new, &h));
        distances.push(d);
        g = g_new;
        h = h_new;
        let ratio = tail_ratio(&distances, TRANSIENT_RATIOS);
        if distances.len() > TRANSIENT_RATIOS + 1 && ratio > INTERIOR_CONTRACTION {
            return Ok(WindowAttempt::Shrink);
        }
        if d <= config.abs_tol {
            return Ok(WindowAttempt::Done(PicardSegment {
                window: *window,
                grid,
                g,
                h,
                diagnostics: PicardDiagnostics {
                    iterations: it,
                    observed_ratio: ratio,
                    distances,
                    converged: true,
                    eps: window.delta,
                    restarts,
                    min_denominator: min_den,
                },
            }));
        }
    }
    Ok(WindowAttempt::Shrink)
}

/// Fixed point of the interior map on `[r1, r1 + delta]`, halving the width
/// until the iteration stays above `a1/2` and contracts by at most 1/3.
pub fn extend_picard(params: &Parameters, window: &ExtensionWindow, config: &SolverConfig) -> Result<PicardSegment> {
    window.check()?;
    let mut w = *window;
    for restart in 0..=MAX_WINDOW_HALVINGS {
        match window_attempt(params, &w, config, restart)? {
            WindowAttempt::Done(seg) => return Ok(seg),
            WindowAttempt::Shrink => w.delta /= 2.0,
        }
    }
    Err(Error::NoConvergence {
        eps: w.delta * 2.0,
        ratio: f64::NAN,
        iterations: config.picard_max_iter,
    })
}

/// Chains interior windows from the last node of `profile` to `r_end`.
/// Each window starts from the exact end values of the previous one.
pub fn extend_picard_chain(
    params: &Parameters,
    profile: &RadialProfile,
    r_end: f64,
    config: &SolverConfig,
) -> Result<(RadialProfile, Vec<PicardDiagnostics>)> {
    let start = *profile.last();
    let (mut r1, mut a0, mut b0) = (start.r, start.f, start.fr);
    let mut tail = vec![start];
    let mut diags = Vec::new();
    while r1 < r_end {
        let mut window = ExtensionWindow::new(r1, a0, b0)?;
        if r1 + window.delta > r_end || r_end - (r1 + window.delta) < 1e-3 * window.delta {
            window.delta = r_end - r1;
        }
        let seg = extend_picard(params, &window, config)?;
        let last = seg.grid.len() - 1;
        // the last window may have shrunk; its end is the new left endpoint
        r1 = if (r_end - seg.grid[last]).abs() <= 1e-12 * r_end {
            r_end
        } else {
            seg.grid[last]
        };
        a0 = seg.g[last];
        b0 = seg.h[last];
        let mut pts = seg.points(params, 128)?;
        if let Some(p) = pts.last_mut() {
            p.r = r1;
        }
        tail.extend(pts.into_iter().skip(1));
        diags.push(seg.diagnostics);
    }
    Ok((profile.append(&tail, Provenance::Picard)?, diags))
}
