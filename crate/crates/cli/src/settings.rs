//! Run settings merged from flags, an optional `key = value` file and defaults.

use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use imcf_profile::{Mode, OutputGrid, Parameters, SolverConfig};
use serde::Serialize;

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Certified,
    Exploratory,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Certified => Mode::Certified,
            ModeArg::Exploratory => Mode::Exploratory,
        }
    }
}

/// Every setting that can come from a flag or from the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n: Option<u32>,
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub r_max: Option<f64>,
    pub tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub rel_tol: Option<f64>,
    pub r_switch: Option<f64>,
    pub picard_max_iter: Option<usize>,
    pub picard_contraction_guard: Option<f64>,
    pub output_grid: Option<OutputGrid>,
    pub mode: Option<ModeArg>,
    pub format: Option<Format>,
    pub plot: Option<bool>,
    pub probe_radii: Option<Vec<f64>>,
    pub n_list: Option<Vec<u32>>,
    pub lambda_list: Option<Vec<f64>>,
    pub mu_list: Option<Vec<f64>>,
}

macro_rules! merge {
    ($hi:expr, $lo:expr, $($field:ident),*) => {
        Overrides { $($field: $hi.$field.or($lo.$field)),* }
    };
}

impl Overrides {
    /// Field-wise `self` if set, otherwise `lower`.
    pub fn over(self, lower: Overrides) -> Overrides {
        merge!(
            self, lower, n, lambda, mu, r_max, tol, abs_tol, rel_tol, r_switch, picard_max_iter,
            picard_contraction_guard, output_grid, mode, format, plot, probe_radii, n_list, lambda_list, mu_list
        )
    }

    pub fn mode(&self) -> Mode {
        self.mode.map(Mode::from).unwrap_or_default()
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(Format::Csv)
    }

    pub fn plot(&self) -> bool {
        self.plot.unwrap_or(false)
    }

    pub fn params(&self) -> CliResult<Parameters> {
        let missing = |name: &str| CliError::Usage(format!("--{name} is required"));
        let n = self.n.ok_or_else(|| missing("n"))?;
        let lambda = self.lambda.ok_or_else(|| missing("lambda"))?;
        let mu = self.mu.ok_or_else(|| missing("mu"))?;
        Ok(imcf_profile::validate(n, lambda, mu)?)
    }

    /// Defaults for `params`, then `tol` (sets `rel_tol = tol`,
    /// `abs_tol = tol / 100`), then the explicit settings.
    pub fn solver_config(&self, params: &Parameters) -> CliResult<SolverConfig> {
        let mut cfg = SolverConfig::for_params(params);
        if let Some(tol) = self.tol {
            cfg.rel_tol = tol;
            cfg.abs_tol = tol * 1e-2;
        }
        if let Some(v) = self.abs_tol {
            cfg.abs_tol = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.r_max {
            cfg.r_max = v;
        }
        if let Some(v) = self.r_switch {
            cfg.r_switch = v;
        }
        if let Some(v) = self.picard_max_iter {
            cfg.picard_max_iter = v;
        }
        if let Some(v) = self.picard_contraction_guard {
            cfg.picard_contraction_guard = v;
        }
        if let Some(v) = self.output_grid {
            cfg.output_grid = v;
        }
        if self.r_switch.is_none() {
            cfg.r_switch = cfg.r_switch.min(cfg.r_max);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> CliResult<T> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {value:?}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> CliResult<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> CliResult<T> {
    T::from_str(value, true).map_err(|_| CliError::Usage(format!("config key {key}: unknown value {value:?}")))
}

/// `log:<per_decade>` or `uniform:<spacing>`.
pub fn parse_grid(value: &str) -> Result<OutputGrid, String> {
    let (kind, arg) = value
        .split_once(':')
        .ok_or_else(|| format!("grid {value:?} must be log:<per_decade> or uniform:<spacing>"))?;
    match kind.trim() {
        "log" => arg
            .trim()
            .parse()
            .map(|per_decade| OutputGrid::Log { per_decade })
            .map_err(|_| format!("bad per_decade {arg:?}")),
        "uniform" => arg
            .trim()
            .parse()
            .map(|spacing| OutputGrid::Uniform { spacing })
            .map_err(|_| format!("bad spacing {arg:?}")),
        other => Err(format!("unknown grid kind {other:?}")),
    }
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::Usage(format!("config key {key}: expected true or false, got {value:?}"))),
    }
}

/// Reads `key = value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> CliResult<Overrides> {
    let mut o = Overrides::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "n" => o.n = Some(parse(key, value)?),
            "lambda" => o.lambda = Some(parse(key, value)?),
            "mu" => o.mu = Some(parse(key, value)?),
            "r_max" => o.r_max = Some(parse(key, value)?),
            "tol" => o.tol = Some(parse(key, value)?),
            "abs_tol" => o.abs_tol = Some(parse(key, value)?),
            "rel_tol" => o.rel_tol = Some(parse(key, value)?),
            "r_switch" => o.r_switch = Some(parse(key, value)?),
            "picard_max_iter" => o.picard_max_iter = Some(parse(key, value)?),
            "picard_contraction_guard" => o.picard_contraction_guard = Some(parse(key, value)?),
            "output_grid" => {
                o.output_grid = Some(parse_grid(value).map_err(|e| CliError::Usage(format!("config key {key}: {e}")))?)
            }
            "mode" => o.mode = Some(parse_enum(key, value)?),
            "format" => o.format = Some(parse_enum(key, value)?),
            "plot" => o.plot = Some(parse_bool(key, value)?),
            "probe_radii" => o.probe_radii = Some(parse_list(key, value)?),
            "n_list" => o.n_list = Some(parse_list(key, value)?),
            "lambda_list" => o.lambda_list = Some(parse_list(key, value)?),
            "mu_list" => o.mu_list = Some(parse_list(key, value)?),
            _ => return Err(CliError::Usage(format!("config line {}: unknown key {key:?}", lineno + 1))),
        }
    }
    Ok(o)
}

pub fn read_config(path: &Path) -> CliResult<Overrides> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_fill_gaps_only() {
        let file = parse_config("n = 3\nlambda = 2 # rate\n\nmu=-1\nr_max = 50\noutput_grid = log:40\n").unwrap();
        let flags = Overrides {
            r_max: Some(10.0),
            ..Default::default()
        };
        let o = flags.over(file);
        assert_eq!(o.r_max, Some(10.0));
        let p = o.params().unwrap();
        assert_eq!((p.n(), p.lambda(), p.mu()), (3, 2.0, -1.0));
        let cfg = o.solver_config(&p).unwrap();
        assert_eq!(cfg.output_grid, OutputGrid::Log { per_decade: 40 });
    }

    #[test]
    fn tol_sets_both_tolerances() {
        let o = Overrides {
            tol: Some(1e-6),
            rel_tol: Some(1e-7),
            ..Default::default()
        };
        let p = imcf_profile::validate(2, 2.0, -1.0).unwrap();
        let cfg = o.solver_config(&p).unwrap();
        assert_eq!((cfg.abs_tol, cfg.rel_tol), (1e-8, 1e-7));
    }

    #[test]
    fn bad_lines_are_usage_errors() {
        for text in ["n 3", "colour = red", "n = three", "mode = fast", "output_grid = cubic:3"] {
            assert!(matches!(parse_config(text), Err(CliError::Usage(_))), "{text}");
        }
    }

    #[test]
    fn lists_split_on_commas() {
        let o = parse_config("mu_list = -0.25, -1,-4").unwrap();
        assert_eq!(o.mu_list, Some(vec![-0.25, -1.0, -4.0]));
    }
}
