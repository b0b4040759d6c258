//! The on-disk instance format.
//!
//! Instances are self-describing JSON with a `schema_version` field.
//! Units follow the core types: kW, kWh, hours, $. A file holds either a
//! dispatch instance or a placement instance, plus an optional scenario
//! section:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "instance": { "v2g": { ... } },
//!   "scenarios": { "w1": 0.5, "w2": 0.5, "scenarios": [ ... ] }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use evgrid_core::scenario::{Scenario, ScenarioSet};
use evgrid_core::{Assignment64, CspInstance64, ScenarioSet64, V2gInstance64};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    V2g(V2gInstance64),
    Csp(CspInstance64),
}

impl InstanceKind {
    pub fn v2g(&self) -> &V2gInstance64 {
        match self {
            InstanceKind::V2g(v) => v,
            InstanceKind::Csp(c) => &c.v2g,
        }
    }

    pub fn as_csp(&self) -> Option<&CspInstance64> {
        match self {
            InstanceKind::Csp(c) => Some(c),
            InstanceKind::V2g(_) => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            InstanceKind::V2g(_) => "v2g",
            InstanceKind::Csp(_) => "csp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSection {
    pub w1: f64,
    pub w2: f64,
    pub scenarios: Vec<Scenario<f64>>,
}

impl ScenarioSection {
    pub fn to_set(&self) -> Result<ScenarioSet64, CliError> {
        ScenarioSet::new(self.scenarios.clone(), self.w1, self.w2)
            .map_err(|e| CliError::Invariant(e.to_string()))
    }

    pub fn from_set(set: &ScenarioSet64) -> Self {
        Self {
            w1: set.w1,
            w2: set.w2,
            scenarios: set.scenarios().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub instance: InstanceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<ScenarioSection>,
}

impl InstanceFile {
    pub fn new(instance: InstanceKind) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            instance,
            scenarios: None,
        }
    }

    /// Full invariant validation of everything the file carries.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        match &self.instance {
            InstanceKind::V2g(v) => v.validate().map_err(CliError::invariant)?,
            InstanceKind::Csp(c) => c.validate().map_err(CliError::invariant)?,
        }
        if let Some(section) = &self.scenarios {
            section.to_set()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("instance serialization");
        text.push('\n');
        text
    }
}

/// Loads and fully validates an instance file.
pub fn load_instance(path: impl AsRef<Path>) -> Result<InstanceFile, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: InstanceFile = serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    file.validate()?;
    Ok(file)
}

pub fn save_instance(file: &InstanceFile, path: impl AsRef<Path>) -> Result<(), CliError> {
    let path = path.as_ref();
    std::fs::write(path, file.to_json())
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub schema_version: u32,
    pub assignment: Assignment64,
}

pub fn load_assignment(path: impl AsRef<Path>) -> Result<Assignment64, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let file: AssignmentFile = serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Parse(format!(
            "unsupported schema_version {}",
            file.schema_version
        )));
    }
    Ok(file.assignment)
}

pub fn save_assignment(a: &Assignment64, path: impl AsRef<Path>) -> Result<(), CliError> {
    let path = path.as_ref();
    let file = AssignmentFile {
        schema_version: SCHEMA_VERSION,
        assignment: a.clone(),
    };
    let mut text = serde_json::to_string_pretty(&file).expect("assignment serialization");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
