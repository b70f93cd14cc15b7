use std::path::Path;

use imcf_profile::{Mode, SolverConfig};
use serde::Serialize;

use crate::error::CliResult;
use crate::instance::Summary;
use crate::output::write_checked_json;
use crate::schema;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InstanceParams {
    pub n: u32,
    pub lambda: f64,
    pub mu: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InstanceRecord {
    pub params: InstanceParams,
    /// Absent when the profile was read from a file.
    pub config: Option<SolverConfig>,
    pub outputs: Vec<String>,
    pub summary: Option<Summary>,
    pub error: Option<String>,
}

/// Everything needed to replay a run. Output paths are relative to the
/// output directory.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub solver_version: &'static str,
    pub command: &'static str,
    pub arguments: Vec<String>,
    pub timestamp: String,
    pub mode: Mode,
    pub outputs: Vec<String>,
    pub instances: Vec<InstanceRecord>,
}

impl RunManifest {
    pub fn new(command: &'static str, mode: Mode) -> Self {
        RunManifest {
            tool: "imcf-profile",
            solver_version: env!("CARGO_PKG_VERSION"),
            command,
            arguments: std::env::args().skip(1).collect(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            mode,
            outputs: Vec::new(),
            instances: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_checked_json(&dir.join(FILE_NAME), self, &schema::MANIFEST)
    }
}
