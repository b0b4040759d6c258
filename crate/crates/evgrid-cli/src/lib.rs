//! File I/O, instance generation, and benchmark orchestration for the
//! toolkit; the `evgrid` binary drives everything in here.

pub mod bench;
pub mod generate;
pub mod schema;

use thiserror::Error;

use evgrid_core::model::StructuredModel;
use evgrid_core::scenario::{build_stochastic_csp, build_stochastic_v2g};
use evgrid_core::v2g::{
    build_contingency_model, build_v2g_model, build_weighted_model, ObjectiveMode,
};
use evgrid_core::Model64;

use schema::{InstanceFile, InstanceKind};

/// CLI-facing error categories; each maps to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("guard exceeded: {0}")]
    Guard(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn invariant(e: impl std::fmt::Display) -> Self {
        CliError::Invariant(e.to_string())
    }

    /// Process exit code for this error category.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Invariant(_) => 3,
            CliError::Guard(_) => 4,
            CliError::Io(_) => 5,
            CliError::Other(_) => 1,
        }
    }
}

impl From<evgrid_core::Error> for CliError {
    fn from(e: evgrid_core::Error) -> Self {
        use evgrid_core::Error as E;
        match &e {
            E::BitGuardExceeded { .. } => CliError::Guard(e.to_string()),
            E::QuboParse { .. } => CliError::Parse(e.to_string()),
            E::EmptyFleet
            | E::SeriesLength { .. }
            | E::InvalidInstance(_)
            | E::BadWeights { .. }
            | E::BadProbabilities { .. }
            | E::BadScenarioOverride { .. }
            | E::EmptyScenarioSet
            | E::UnknownLocation(_)
            | E::UnknownNode(_) => CliError::Invariant(e.to_string()),
            _ => CliError::Other(e.to_string()),
        }
    }
}

/// Builds the model an instance file describes: the dispatch builder
/// matching the objective mode, the placement builder for placement
/// instances, and the stochastic assembly when a scenario section is
/// present.
pub fn build_model(file: &InstanceFile) -> Result<Model64, CliError> {
    let model: StructuredModel<f64> = match (&file.instance, &file.scenarios) {
        (InstanceKind::V2g(v), None) => match v.objective_mode {
            ObjectiveMode::Cost => build_v2g_model(v)?,
            ObjectiveMode::Contingency => build_contingency_model(v)?,
            ObjectiveMode::Weighted { .. } => build_weighted_model(v)?,
        },
        (InstanceKind::V2g(v), Some(section)) => {
            build_stochastic_v2g(v, &section.to_set()?)?
        }
        (InstanceKind::Csp(c), None) => evgrid_core::csp::build_csp_model(c)?,
        (InstanceKind::Csp(c), Some(section)) => {
            build_stochastic_csp(c, &section.to_set()?)?
        }
    };
    Ok(model)
}
