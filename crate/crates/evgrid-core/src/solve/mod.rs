//! QUBO and discretized-model solvers: an exhaustive ground-truth
//! oracle, simulated annealing as the desk-scale annealer stand-in,
//! steepest greedy descent, a constrained-space reference enumerator,
//! and the hybrid discrete/continuous decomposition.
//!
//! Every solver is a deterministic function of its inputs and seed; ties
//! break lexicographically on the bitstring.

mod anneal;
mod brute;
mod greedy;
mod hybrid;
mod reference;

pub use anneal::{simulated_anneal, AnnealSchedule};
pub use brute::{brute_force, brute_force_with_guard, DEFAULT_BIT_GUARD};
pub use greedy::greedy_descent;
pub use hybrid::{hybrid_solve, HybridConfig, HybridSolution};
pub use reference::{exact_discrete_reference, ReferenceOutcome};

use std::time::Duration;

use crate::scalar::Scalar;

/// Outcome of a QUBO solve.
#[derive(Debug, Clone)]
pub struct SolveResult<S> {
    pub best_bits: Vec<bool>,
    /// Exact energy of `best_bits` (recomputed, not the incremental
    /// tracking value).
    pub best_energy: S,
    /// Best-so-far energy after each sweep, one trace per restart.
    /// Non-increasing within each trace by construction.
    pub energy_trace: Vec<Vec<S>>,
    pub wall_time: Duration,
    /// Filled by pipelines that decode and feasibility-check the result.
    pub feasible_after_decode: Option<bool>,
}

impl<S: Scalar> SolveResult<S> {
    pub(crate) fn new(best_bits: Vec<bool>, best_energy: S, wall_time: Duration) -> Self {
        Self {
            best_bits,
            best_energy,
            energy_trace: Vec::new(),
            wall_time,
            feasible_after_decode: None,
        }
    }
}
