//! JSON schemas shipped in `schemas/`, embedded at build time.

use std::path::Path;

use jsonschema::JSONSchema;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub struct Schema {
    pub name: &'static str,
    pub text: &'static str,
}

pub const PROFILE: Schema = Schema {
    name: "profile.schema.json",
    text: include_str!("../../../schemas/profile.schema.json"),
};

pub const MANIFEST: Schema = Schema {
    name: "manifest.schema.json",
    text: include_str!("../../../schemas/manifest.schema.json"),
};

pub const VERIFICATION: Schema = Schema {
    name: "verification.schema.json",
    text: include_str!("../../../schemas/verification.schema.json"),
};

pub const SWEEP: Schema = Schema {
    name: "sweep.schema.json",
    text: include_str!("../../../schemas/sweep.schema.json"),
};

#[cfg(test)]
pub const ALL: [&Schema; 4] = [&PROFILE, &MANIFEST, &VERIFICATION, &SWEEP];

impl Schema {
    pub fn compiled(&self) -> JSONSchema {
        let value: Value = serde_json::from_str(self.text).expect("embedded schema is valid JSON");
        JSONSchema::compile(&value).expect("embedded schema compiles")
    }
}

/// Validates `value`; the error lists up to five violated rules with their
/// instance paths.
pub fn check(schema: &Schema, value: &Value, path: &Path) -> CliResult<()> {
    let compiled = schema.compiled();
    let result = compiled.validate(value);
    if let Err(errors) = result {
        let details: Vec<String> = errors
            .take(5)
            .map(|e| {
                let at = e.instance_path.to_string();
                format!("{} at {}", e, if at.is_empty() { "/".into() } else { at })
            })
            .collect();
        return Err(CliError::Schema {
            path: path.into(),
            schema: schema.name,
            details: details.join("; "),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedded_schemas_compile() {
        for s in ALL {
            s.compiled();
        }
    }
}
