//! Profile tables, JSON documents and the profile reader.

use std::path::Path;

use imcf_profile::profile::Segment;
use imcf_profile::{Mode, Parameters, ProfilePoint, RadialProfile};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, CliError, CliResult};
use crate::schema;

/// Shortest round-trip scientific form; independent of locale.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(file))
}

pub const PROFILE_COLUMNS: [&str; 6] = ["r", "f", "fr", "frr", "w", "q"];

pub fn write_profile_csv(path: &Path, profile: &RadialProfile) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    w.write_record(PROFILE_COLUMNS)?;
    for p in profile.points() {
        w.write_record([num(p.r), num(p.f), num(p.fr), num(p.frr), num(p.w()), opt_num(p.q())])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRow {
    pub r: f64,
    pub f: f64,
    pub fr: f64,
    pub frr: f64,
    pub w: f64,
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileDocument {
    pub params: Parameters,
    pub mode: Option<Mode>,
    pub points: Vec<PointRow>,
    #[serde(default)]
    pub segments: Vec<Segment>,
}

impl ProfileDocument {
    pub fn new(profile: &RadialProfile, mode: Mode) -> Self {
        ProfileDocument {
            params: *profile.params(),
            mode: Some(mode),
            points: profile
                .points()
                .iter()
                .map(|p| PointRow {
                    r: p.r,
                    f: p.f,
                    fr: p.fr,
                    frr: p.frr,
                    w: p.w(),
                    q: p.q(),
                })
                .collect(),
            segments: profile.segments().to_vec(),
        }
    }

    pub fn into_profile(self) -> CliResult<RadialProfile> {
        let points: Vec<ProfilePoint> = self
            .points
            .iter()
            .map(|p| ProfilePoint {
                r: p.r,
                f: p.f,
                fr: p.fr,
                frr: p.frr,
            })
            .collect();
        let profile = if self.segments.is_empty() {
            RadialProfile::new(self.params, points, imcf_profile::Provenance::Integrator)?
        } else {
            RadialProfile::with_segments(self.params, points, self.segments)?
        };
        Ok(profile)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

/// Writes `value` after checking it against `schema`.
pub fn write_checked_json<T: Serialize>(path: &Path, value: &T, schema: &schema::Schema) -> CliResult<()> {
    let json = serde_json::to_value(value).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })?;
    schema::check(schema, &json, path)?;
    write_json(path, &json)
}

/// Reads a profile document, checking it against the profile schema before
/// anything else so that malformed files are reported by schema rule.
pub fn read_profile(path: &Path) -> CliResult<RadialProfile> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })?;
    schema::check(&schema::PROFILE, &value, path)?;
    let doc: ProfileDocument = serde_json::from_value(value).map_err(|source| CliError::Json {
        path: path.into(),
        source,
    })?;
    doc.into_profile()
}
