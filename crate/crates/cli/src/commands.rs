//! The three subcommands. Each returns the process exit code.

use std::path::Path;

use imcf_profile::validate;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{io_err, CliError, CliResult};
use crate::instance::{self, Instance};
use crate::manifest::{InstanceParams, InstanceRecord, RunManifest};
use crate::output::{self, csv_writer, num, opt_num, write_checked_json, ProfileDocument};
use crate::plot::profile_charts;
use crate::schema;
use crate::settings::{Format, Overrides};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_BREAKDOWN: i32 = 2;

pub const VERIFICATION_FILE: &str = "verification.json";

fn prepare(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(io_err(out))
}

/// Profile table and optional plots for one instance, named from `stem`.
fn write_instance(out: &Path, stem: &str, inst: &Instance, format: Format, plot: bool) -> CliResult<Vec<String>> {
    let mut files = Vec::new();
    let table = format!("{stem}.{}", format.extension());
    match format {
        Format::Csv => output::write_profile_csv(&out.join(&table), inst.profile())?,
        Format::Json => write_checked_json(
            &out.join(&table),
            &ProfileDocument::new(inst.profile(), inst.solution.mode),
            &schema::PROFILE,
        )?,
    }
    files.push(table);
    if plot {
        let (f, q) = profile_charts(inst.profile(), inst.summary.alpha0);
        for (suffix, svg) in [("f", f), ("q", q)] {
            let name = format!("{stem}_{suffix}.svg");
            let path = out.join(&name);
            std::fs::write(&path, svg).map_err(io_err(&path))?;
            files.push(name);
        }
    }
    Ok(files)
}

fn record(inst: &Instance, outputs: Vec<String>) -> InstanceRecord {
    let p = inst.solution.params;
    InstanceRecord {
        params: InstanceParams {
            n: p.n(),
            lambda: p.lambda(),
            mu: p.mu(),
        },
        config: Some(inst.solution.config),
        outputs,
        summary: Some(inst.summary.clone()),
        error: None,
    }
}

fn report_events(inst: &Instance) {
    for e in &inst.summary.events {
        eprintln!("monitor event: {e}");
    }
}

pub fn solve(o: &Overrides, out: &Path) -> CliResult<i32> {
    let params = o.params()?;
    let config = o.solver_config(&params)?;
    let mode = o.mode();
    prepare(out)?;
    let inst = instance::run(&params, &config, mode, o.probe_radii.as_deref())?;
    let files = write_instance(out, "profile", &inst, o.format(), o.plot())?;
    let mut manifest = RunManifest::new("solve", mode);
    manifest.outputs = files.clone();
    manifest.instances.push(record(&inst, files));
    manifest.write(out)?;

    report_events(&inst);
    let s = &inst.summary;
    println!(
        "n = {}, lambda = {}, mu = {}: r_end = {}, {} events, verification {}, q_limit_estimate = {}, alpha0 = {}",
        params.n(),
        params.lambda(),
        params.mu(),
        s.r_end,
        s.events.len(),
        match s.verification_pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "not run",
        },
        s.q_limit_estimate.map_or("n/a".into(), |v| v.to_string()),
        s.alpha0.map_or("n/a".into(), |v| v.to_string()),
    );
    Ok(if inst.breaks_certification() { EXIT_BREAKDOWN } else { EXIT_PASS })
}

/// One line of the sweep table.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: u32,
    pub lambda: f64,
    pub mu: f64,
    pub alpha0: Option<f64>,
    pub q_limit_estimate: Option<f64>,
    pub abs_q_limit_minus_alpha0: Option<f64>,
    pub q_at_r_max: Option<f64>,
    pub ode_residual_max: Option<f64>,
    pub integral_identity_defect_max: Option<f64>,
    pub integrating_factor_defect_max: Option<f64>,
    pub pde_residual_max: Option<f64>,
    pub oracle_mismatch_at_probe: Option<f64>,
    pub events: usize,
    pub completed: bool,
    pub pass: bool,
    pub profile: Option<String>,
    pub error: Option<String>,
}

const SWEEP_COLUMNS: [&str; 17] = [
    "n",
    "lambda",
    "mu",
    "alpha0",
    "q_limit_estimate",
    "abs_q_limit_minus_alpha0",
    "q_at_r_max",
    "ode_residual_max",
    "integral_identity_defect_max",
    "integrating_factor_defect_max",
    "pde_residual_max",
    "oracle_mismatch_at_probe",
    "events",
    "completed",
    "pass",
    "profile",
    "error",
];

impl SweepRow {
    fn failed(n: u32, lambda: f64, mu: f64, error: String) -> Self {
        SweepRow {
            n,
            lambda,
            mu,
            alpha0: None,
            q_limit_estimate: None,
            abs_q_limit_minus_alpha0: None,
            q_at_r_max: None,
            ode_residual_max: None,
            integral_identity_defect_max: None,
            integrating_factor_defect_max: None,
            pde_residual_max: None,
            oracle_mismatch_at_probe: None,
            events: 0,
            completed: false,
            pass: false,
            profile: None,
            error: Some(error),
        }
    }

    fn cells(&self) -> Vec<String> {
        let d = |v: Option<f64>| opt_num(v);
        vec![
            self.n.to_string(),
            num(self.lambda),
            num(self.mu),
            d(self.alpha0),
            d(self.q_limit_estimate),
            d(self.abs_q_limit_minus_alpha0),
            d(self.q_at_r_max),
            d(self.ode_residual_max),
            d(self.integral_identity_defect_max),
            d(self.integrating_factor_defect_max),
            d(self.pde_residual_max),
            d(self.oracle_mismatch_at_probe),
            self.events.to_string(),
            self.completed.to_string(),
            self.pass.to_string(),
            self.profile.clone().unwrap_or_default(),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

#[derive(Serialize)]
struct SweepDocument<'a> {
    columns: &'a [&'a str],
    rows: &'a [SweepRow],
}

struct RowOutcome {
    row: SweepRow,
    record: InstanceRecord,
    breaks: bool,
}

fn dedup<T: PartialEq + Copy>(values: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for v in values {
        if !out.contains(v) {
            out.push(*v);
        }
    }
    out
}

fn run_row(o: &Overrides, out: &Path, n: u32, lambda: f64, mu: f64) -> CliResult<RowOutcome> {
    let failed = |e: String| {
        let record = InstanceRecord {
            params: InstanceParams { n, lambda, mu },
            config: None,
            outputs: Vec::new(),
            summary: None,
            error: Some(e.clone()),
        };
        Ok(RowOutcome {
            row: SweepRow::failed(n, lambda, mu, e),
            record,
            breaks: false,
        })
    };
    let params = match validate(n, lambda, mu) {
        Ok(p) => p,
        Err(e) => return failed(e.to_string()),
    };
    let config = o.solver_config(&params)?;
    let inst = match instance::run(&params, &config, o.mode(), o.probe_radii.as_deref()) {
        Ok(i) => i,
        Err(CliError::Solver(e)) => return failed(e.to_string()),
        Err(e) => return Err(e),
    };
    let stem = format!("profile_n{n}_lambda{lambda}_mu{mu}");
    let files = write_instance(out, &stem, &inst, o.format(), o.plot())?;
    let s = &inst.summary;
    let d = s.defects;
    let row = SweepRow {
        n,
        lambda,
        mu,
        alpha0: s.alpha0,
        q_limit_estimate: s.q_limit_estimate,
        abs_q_limit_minus_alpha0: s.q_limit_estimate.zip(s.alpha0).map(|(q, a)| (q - a).abs()),
        q_at_r_max: s.q_at_r_max,
        ode_residual_max: d.map(|d| d.ode_residual_max),
        integral_identity_defect_max: d.map(|d| d.integral_identity_defect_max),
        integrating_factor_defect_max: d.map(|d| d.integrating_factor_defect_max),
        pde_residual_max: d.map(|d| d.pde_residual_max),
        oracle_mismatch_at_probe: d.map(|d| d.oracle_mismatch_at_probe),
        events: s.events.len(),
        completed: s.completed,
        pass: s.pass,
        profile: files.first().cloned(),
        error: None,
    };
    Ok(RowOutcome {
        row,
        breaks: inst.breaks_certification(),
        record: record(&inst, files),
    })
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("IMCF_PROFILE_THREADS") {
        let threads: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|t| *t > 0)
            .ok_or_else(|| CliError::Usage(format!("IMCF_PROFILE_THREADS must be a positive integer, got {v:?}")))?;
        builder = builder.num_threads(threads);
    }
    builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))
}

pub fn sweep(o: &Overrides, out: &Path) -> CliResult<i32> {
    let ns = dedup(&o.n_list.clone().or(o.n.map(|v| vec![v])).unwrap_or_default());
    let lambdas = dedup(&o.lambda_list.clone().or(o.lambda.map(|v| vec![v])).unwrap_or_default());
    let mus = dedup(&o.mu_list.clone().or(o.mu.map(|v| vec![v])).unwrap_or_default());
    if ns.is_empty() || lambdas.is_empty() || mus.is_empty() {
        return Err(CliError::Usage(format!(
            "empty grid: {} n values, {} lambda values, {} mu values (use --n-list, --lambda-list, --mu-list)",
            ns.len(),
            lambdas.len(),
            mus.len()
        )));
    }
    let mut grid = Vec::with_capacity(ns.len() * lambdas.len() * mus.len());
    for &n in &ns {
        for &lambda in &lambdas {
            for &mu in &mus {
                grid.push((n, lambda, mu));
            }
        }
    }
    prepare(out)?;
    let pool = thread_pool()?;
    let outcomes: Vec<RowOutcome> = pool.install(|| {
        grid.par_iter()
            .map(|&(n, lambda, mu)| run_row(o, out, n, lambda, mu))
            .collect::<CliResult<_>>()
    })?;

    let rows: Vec<SweepRow> = outcomes.iter().map(|r| r.row.clone()).collect();
    let table = format!("sweep.{}", o.format().extension());
    let table_path = out.join(&table);
    match o.format() {
        Format::Csv => {
            let mut w = csv_writer(&table_path)?;
            w.write_record(SWEEP_COLUMNS)?;
            for row in &rows {
                w.write_record(row.cells())?;
            }
            w.flush().map_err(io_err(&table_path))?;
        }
        Format::Json => write_checked_json(
            &table_path,
            &SweepDocument {
                columns: &SWEEP_COLUMNS,
                rows: &rows,
            },
            &schema::SWEEP,
        )?,
    }

    let mut manifest = RunManifest::new("sweep", o.mode());
    manifest.outputs.push(table);
    for r in &outcomes {
        manifest.outputs.extend(r.record.outputs.iter().cloned());
    }
    manifest.instances = outcomes.iter().map(|r| r.record.clone()).collect();
    manifest.write(out)?;

    let passed = rows.iter().filter(|r| r.pass).count();
    println!("{passed}/{} instances pass", rows.len());
    for r in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("n = {}, lambda = {}, mu = {}: {}", r.n, r.lambda, r.mu, r.error.as_deref().unwrap_or(""));
    }
    if outcomes.iter().any(|r| r.breaks) {
        Ok(EXIT_BREAKDOWN)
    } else if rows.iter().any(|r| r.error.is_some()) {
        Ok(EXIT_USAGE)
    } else {
        Ok(EXIT_PASS)
    }
}

pub fn verify(o: &Overrides, profile: Option<&Path>, out: &Path) -> CliResult<i32> {
    let mode = o.mode();
    let probes = o.probe_radii.as_deref();
    let (report, summary, record_params, config, breaks) = match profile {
        Some(path) => {
            let prof = output::read_profile(path)?;
            let (report, summary) = instance::assess(&prof, probes);
            let p = *prof.params();
            (report, summary, p, None, false)
        }
        None => {
            let params = o.params()?;
            let config = o.solver_config(&params)?;
            let inst = instance::run(&params, &config, mode, probes)?;
            report_events(&inst);
            let breaks = inst.breaks_certification();
            (inst.report, inst.summary, params, Some(config), breaks)
        }
    };
    let report = report.ok_or_else(|| CliError::Verification(summary.verification_note.clone().unwrap_or_default()))?;
    prepare(out)?;
    write_checked_json(&out.join(VERIFICATION_FILE), &report, &schema::VERIFICATION)?;

    let mut manifest = RunManifest::new("verify", mode);
    manifest.outputs.push(VERIFICATION_FILE.into());
    manifest.instances.push(InstanceRecord {
        params: InstanceParams {
            n: record_params.n(),
            lambda: record_params.lambda(),
            mu: record_params.mu(),
        },
        config,
        outputs: vec![VERIFICATION_FILE.into()],
        summary: Some(summary),
        error: None,
    });
    manifest.write(out)?;

    let flags = report.pass;
    println!(
        "ode residual {:.3e} ({}), integral identity {:.3e} ({}), integrating factor {:.3e} ({}), pde residual {:.3e} ({}), oracle {:.3e} ({})",
        report.ode_residual_max,
        verdict(flags.ode_residual),
        report.integral_identity_defect_max,
        verdict(flags.integral_identity),
        report.integrating_factor_defect_max,
        verdict(flags.integrating_factor),
        report.pde_residual_max,
        verdict(flags.pde_residual),
        report.oracle_mismatch_at_probe,
        verdict(flags.oracle),
    );
    Ok(if report.passed() && !breaks { EXIT_PASS } else { EXIT_BREAKDOWN })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}
