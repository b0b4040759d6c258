//! Single-bit-flip Metropolis annealing with geometric temperature decay
//! and independent restarts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::qubo::QuboProblem;
use crate::scalar::Scalar;

use super::SolveResult;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule<S> {
    pub initial_temperature: S,
    pub final_temperature: S,
    pub sweeps: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl<S: Scalar> AnnealSchedule<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.final_temperature > S::zero()
            && self.initial_temperature >= self.final_temperature)
        {
            return Err(Error::InvalidSchedule(
                "need initial >= final > 0".into(),
            ));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidSchedule("need at least one sweep".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidSchedule("need at least one restart".into()));
        }
        Ok(())
    }

    /// Schedule sized from the problem: the initial temperature covers
    /// the largest possible single-flip energy change.
    pub fn default_for(q: &QuboProblem<S>, seed: u64) -> Self {
        let (diag, neighbors) = q.adjacency();
        let mut max_delta = S::one();
        for bit in 0..q.num_bits() {
            let reach = neighbors[bit]
                .iter()
                .fold(diag[bit].abs(), |acc, &(_, c)| acc + c.abs());
            max_delta = max_delta.max(reach);
        }
        Self {
            initial_temperature: max_delta,
            final_temperature: max_delta * S::from_f64_lossy(1e-4),
            sweeps: 200,
            restarts: 8,
            seed,
        }
    }

    fn temperature(&self, sweep: usize) -> S {
        if self.sweeps <= 1 {
            return self.initial_temperature;
        }
        let ratio = (self.final_temperature / self.initial_temperature)
            .to_f64_lossy()
            .powf(sweep as f64 / (self.sweeps - 1) as f64);
        self.initial_temperature * S::from_f64_lossy(ratio)
    }
}

/// Metropolis sweeps over bits in index order under the geometric
/// schedule. Flip deltas come from the adjacency of the flipped bit
/// only; the full energy is never re-evaluated inside the loop.
/// Deterministic for a fixed `(problem, schedule, seed)`.
pub fn simulated_anneal<S: Scalar>(
    q: &QuboProblem<S>,
    sched: &AnnealSchedule<S>,
) -> Result<SolveResult<S>> {
    sched.validate()?;
    let start = Instant::now();
    let n = q.num_bits();
    let (diag, neighbors) = q.adjacency();

    let mut global_best: Option<(S, Vec<bool>)> = None;
    let mut traces = Vec::with_capacity(sched.restarts);

    for restart in 0..sched.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(
            sched
                .seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(restart as u64)),
        );
        let mut bits: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        let mut energy = q.energy(&bits)?;
        let mut best_energy = energy;
        let mut best_bits = bits.clone();
        let mut trace = Vec::with_capacity(sched.sweeps);

        for sweep in 0..sched.sweeps {
            let temp = sched.temperature(sweep).to_f64_lossy();
            for bit in 0..n {
                let delta = q.flip_delta(&bits, bit, &diag, &neighbors);
                let accept = if delta <= S::zero() {
                    true
                } else {
                    rng.random::<f64>() < (-delta.to_f64_lossy() / temp).exp()
                };
                if accept {
                    bits[bit] = !bits[bit];
                    energy = energy + delta;
                    if energy < best_energy {
                        best_energy = energy;
                        best_bits.copy_from_slice(&bits);
                    }
                }
            }
            trace.push(best_energy);
        }
        traces.push(trace);

        let exact = q.energy(&best_bits)?;
        let better = match &global_best {
            None => true,
            Some((e, b)) => exact < *e || (exact == *e && best_bits < *b),
        };
        if better {
            global_best = Some((exact, best_bits));
        }
    }

    let (best_energy, best_bits) = global_best.expect("at least one restart");
    let mut result = SolveResult::new(best_bits, best_energy, start.elapsed());
    result.energy_trace = traces;
    Ok(result)
}
