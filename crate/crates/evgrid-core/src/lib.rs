//! Resilience-scheduling optimization toolkit: vehicle-to-grid dispatch
//! and mobile charging-asset placement models, scenario-weighted
//! stochastic assembly, a QUBO transpiler built on one-hot encodings and
//! squared penalties, and desk-scale solvers (exhaustive, simulated
//! annealing, greedy descent, hybrid).
//!
//! The numeric core is generic over [`scalar::Scalar`] (`f32` or `f64`);
//! the aliases below fix `f64` for everyday use.

pub mod csp;
pub mod error;
pub mod model;
pub mod qubo;
pub mod scalar;
pub mod scenario;
pub mod solve;
pub mod v2g;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` aliases for the main types.
pub type Model64 = model::StructuredModel<f64>;
pub type Assignment64 = model::Assignment<f64>;
pub type V2gInstance64 = v2g::V2GInstance<f64>;
pub type CspInstance64 = csp::CSPInstance<f64>;
pub type ScenarioSet64 = scenario::ScenarioSet<f64>;
pub type Qubo64 = qubo::QuboProblem<f64>;
pub type EncodingSet64 = qubo::EncodingSet<f64>;
pub type PenaltyConfig64 = qubo::PenaltyConfig<f64>;
pub type AnnealSchedule64 = solve::AnnealSchedule<f64>;
pub type SolveResult64 = solve::SolveResult<f64>;
