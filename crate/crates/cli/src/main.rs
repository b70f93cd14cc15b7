//! `imcf-profile`: solve, sweep and verify self-similar profiles.
//!
//! Exit codes: 0 pass, 1 usage or domain error, 2 invariant breakdown or
//! failed check in certified mode.

mod commands;
mod error;
mod instance;
mod manifest;
mod output;
mod plot;
mod schema;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliResult;
use crate::settings::{parse_grid, read_config, Format, ModeArg, Overrides};

#[derive(Parser)]
#[command(name = "imcf-profile", version, about = "Self-similar profiles of the inverse mean curvature flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance and write its profile table.
    Solve(SolveArgs),
    /// Solve the Cartesian product of parameter lists.
    Sweep(SweepArgs),
    /// Run the verification checks and write a JSON report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Dimension n >= 2.
    #[arg(long)]
    n: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Height at the origin, negative.
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long)]
    r_max: Option<f64>,
    /// Relative tolerance; the absolute tolerance is set to tol/100.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Also write SVG charts of f and q.
    #[arg(long)]
    plot: bool,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output grid, `log:<per_decade>` or `uniform:<spacing>`.
    #[arg(long, value_parser = parse_grid)]
    grid: Option<imcf_profile::OutputGrid>,
    /// Radii for the identity and spacetime checks.
    #[arg(long, value_delimiter = ',')]
    probe_radii: Option<Vec<f64>>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda_list: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu_list: Option<Vec<f64>>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Verify a profile JSON file instead of solving.
    #[arg(long)]
    profile: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> CliResult<Overrides> {
        let flags = Overrides {
            n: self.n,
            lambda: self.lambda,
            mu: self.mu,
            r_max: self.r_max,
            tol: self.tol,
            output_grid: self.grid,
            mode: self.mode,
            format: self.format,
            plot: self.plot.then_some(true),
            probe_radii: self.probe_radii.clone(),
            ..Default::default()
        };
        match &self.config {
            Some(path) => Ok(flags.over(read_config(path)?)),
            None => Ok(flags),
        }
    }
}

fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Solve(a) => commands::solve(&a.common.overrides()?, &a.common.out),
        Command::Sweep(a) => {
            let lists = Overrides {
                n_list: a.n_list.clone(),
                lambda_list: a.lambda_list.clone(),
                mu_list: a.mu_list.clone(),
                ..Default::default()
            };
            commands::sweep(&lists.over(a.common.overrides()?), &a.common.out)
        }
        Command::Verify(a) => commands::verify(&a.common.overrides()?, a.profile.as_deref(), &a.common.out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { commands::EXIT_USAGE as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::EXIT_USAGE as u8)
        }
    }
}
