//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, transpilation, and solving.
#[derive(Debug, Error)]
pub enum Error {
    #[error("fleet is empty")]
    EmptyFleet,

    #[error("series `{name}` has length {got}, expected {expected}")]
    SeriesLength {
        name: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("assignment is missing variable `{0}`")]
    MissingVariable(String),

    #[error("unknown location `{0}`")]
    UnknownLocation(String),

    #[error("unknown graph node `{0}`")]
    UnknownNode(String),

    #[error("scenario `{scenario}` overrides nonexistent {what} index {index}")]
    BadScenarioOverride {
        scenario: String,
        what: &'static str,
        index: usize,
    },

    #[error("scenario set is empty")]
    EmptyScenarioSet,

    #[error("scenario probabilities sum to {sum}, expected 1")]
    BadProbabilities { sum: f64 },

    #[error("objective weights w1={w1} w2={w2} must be in [0,1] and sum to 1")]
    BadWeights { w1: f64, w2: f64 },

    #[error("no encoding for continuous variable `{0}`")]
    UnencodedVariable(String),

    #[error("invalid encoding: {0}")]
    InvalidEncoding(String),

    #[error("bit count {bits} exceeds the exhaustive-search guard of {guard}")]
    BitGuardExceeded { bits: usize, guard: usize },

    #[error("bitstring has {got} bits, expected {expected}")]
    BitLength { got: usize, expected: usize },

    #[error("invalid annealing schedule: {0}")]
    InvalidSchedule(String),

    #[error("model is not separable for the hybrid solver: {0}")]
    NonSeparable(String),

    #[error("QUBO parse error at line {line}: {message}")]
    QuboParse { line: usize, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
