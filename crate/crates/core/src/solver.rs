//! End-to-end construction: origin fixed point, then continuation.

use serde::Serialize;

use crate::continuation::{extend_rk, Mode, MonitorEvent};
use crate::error::Result;
use crate::origin::{solve_origin, PicardDiagnostics};
use crate::params::{Parameters, SolverConfig};
use crate::profile::RadialProfile;

/// Intervals kept from the fixed-point grid below the handoff radius.
pub const ORIGIN_INTERVALS: usize = 128;

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub params: Parameters,
    pub config: SolverConfig,
    pub mode: Mode,
    #[serde(skip)]
    pub profile: RadialProfile,
    pub origin: PicardDiagnostics,
    /// Handoff radius actually used, `min(r_switch, eps)`.
    pub r_switch: f64,
    pub events: Vec<MonitorEvent>,
    /// Estimated error in `f` at the last node.
    pub error_estimate: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub stiff_switch_r: Option<f64>,
    /// True when the profile reaches `config.r_max`.
    pub completed: bool,
}

impl Solution {
    /// No invariant violations and the full range was reached.
    pub fn clean(&self) -> bool {
        self.events.is_empty() && self.completed
    }
}

/// Solves the profile on `[0, config.r_max]`.
pub fn solve(params: &Parameters, config: &SolverConfig, mode: Mode) -> Result<Solution> {
    config.validate()?;
    if mode == Mode::Certified {
        params.require_global()?;
    }
    let (origin_profile, origin) = solve_origin(params, config)?;
    let r_switch = config.r_switch.min(origin.eps).min(config.r_max);
    let below = origin_profile.points().iter().filter(|p| p.r < r_switch).count();
    let stride = (below / ORIGIN_INTERVALS).max(1);
    let base = origin_profile.truncated(r_switch, stride)?;
    let ext = extend_rk(params, &base, config, mode)?;
    Ok(Solution {
        params: *params,
        config: *config,
        mode,
        profile: ext.profile,
        origin,
        r_switch,
        events: ext.events,
        error_estimate: ext.error_estimate,
        accepted_steps: ext.accepted_steps,
        rejected_steps: ext.rejected_steps,
        stiff_switch_r: ext.stiff_switch_r,
        completed: ext.completed,
    })
}
