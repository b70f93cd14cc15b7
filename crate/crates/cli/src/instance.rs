//! One solve plus the derived checks, shared by every command.

use imcf_profile::verify::{default_probe_radii, verify_profile, VerifyTolerances};
use imcf_profile::{
    alpha0, estimate_limit, solve, Mode, MonitorEvent, Parameters, RadialProfile, Solution, SolverConfig,
    VerificationReport,
};
use serde::Serialize;

use crate::error::CliResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Defects {
    pub ode_residual_max: f64,
    pub integral_identity_defect_max: f64,
    pub integrating_factor_defect_max: f64,
    pub pde_residual_max: f64,
    pub oracle_mismatch_at_probe: f64,
}

impl From<&VerificationReport> for Defects {
    fn from(r: &VerificationReport) -> Self {
        Defects {
            ode_residual_max: r.ode_residual_max,
            integral_identity_defect_max: r.integral_identity_defect_max,
            integrating_factor_defect_max: r.integrating_factor_defect_max,
            pde_residual_max: r.pde_residual_max,
            oracle_mismatch_at_probe: r.oracle_mismatch_at_probe,
        }
    }
}

/// What the manifest records about one instance.
#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    /// `None` when `lambda (n-1) <= 1`.
    pub alpha0: Option<f64>,
    pub q_limit_estimate: Option<f64>,
    pub extrapolation_uncertainty: Option<f64>,
    pub q_at_r_max: Option<f64>,
    /// Why the asymptotic estimate is missing, if it is.
    pub asymptotics_note: Option<String>,
    pub defects: Option<Defects>,
    pub verification_pass: Option<bool>,
    pub verification_note: Option<String>,
    pub events: Vec<MonitorEvent>,
    pub completed: bool,
    pub r_end: f64,
    pub error_estimate: Option<f64>,
    /// Clean run and every verification check passed.
    pub pass: bool,
}

pub struct Instance {
    pub solution: Solution,
    pub report: Option<VerificationReport>,
    pub summary: Summary,
}

impl Instance {
    pub fn profile(&self) -> &RadialProfile {
        &self.solution.profile
    }

    /// Whether this instance should turn the exit code to 2.
    pub fn breaks_certification(&self) -> bool {
        self.solution.mode == Mode::Certified && !self.summary.pass
    }
}

/// Verification and asymptotics for an existing profile.
pub fn assess(profile: &RadialProfile, probes: Option<&[f64]>) -> (Option<VerificationReport>, Summary) {
    let params = *profile.params();
    let probes = probes.map(<[f64]>::to_vec).unwrap_or_else(|| default_probe_radii(profile));
    let (report, verification_note) = match verify_profile(profile, &probes, VerifyTolerances::default()) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (asym, asymptotics_note) = match estimate_limit(profile, &params) {
        Ok(a) => (Some(a), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let events = imcf_profile::detect_breakdown(&params, profile);
    let verification_pass = report.as_ref().map(VerificationReport::passed);
    let summary = Summary {
        alpha0: alpha0(&params).ok(),
        q_limit_estimate: asym.as_ref().map(|a| a.q_limit_estimate),
        extrapolation_uncertainty: asym.as_ref().map(|a| a.extrapolation_uncertainty),
        q_at_r_max: asym.as_ref().map(|a| a.q_at_r_max),
        asymptotics_note,
        defects: report.as_ref().map(Defects::from),
        verification_pass,
        verification_note,
        pass: events.is_empty() && verification_pass == Some(true),
        events,
        completed: true,
        r_end: profile.r_max(),
        error_estimate: None,
    };
    (report, summary)
}

pub fn run(params: &Parameters, config: &SolverConfig, mode: Mode, probes: Option<&[f64]>) -> CliResult<Instance> {
    let solution = solve(params, config, mode)?;
    let (report, mut summary) = assess(&solution.profile, probes);
    // events found during the march take precedence over a rescan of the nodes
    summary.events = solution.events.clone();
    summary.completed = solution.completed;
    summary.error_estimate = Some(solution.error_estimate);
    summary.pass = solution.clean() && summary.verification_pass == Some(true);
    Ok(Instance {
        solution,
        report,
        summary,
    })
}
