//! Exhaustive QUBO enumeration.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::qubo::QuboProblem;
use crate::scalar::Scalar;

use super::SolveResult;

/// Bit-count cap for exhaustive enumeration.
pub const DEFAULT_BIT_GUARD: usize = 26;

/// Finds the global minimum with the default guard.
pub fn brute_force<S: Scalar>(q: &QuboProblem<S>) -> Result<SolveResult<S>> {
    brute_force_with_guard(q, DEFAULT_BIT_GUARD)
}

/// Enumerates every bitstring depth-first in lexicographic order with
/// incremental flip deltas, so ties resolve to the lexicographically
/// smallest minimizer and float drift stays bounded by the recursion
/// depth.
pub fn brute_force_with_guard<S: Scalar>(
    q: &QuboProblem<S>,
    guard: usize,
) -> Result<SolveResult<S>> {
    let n = q.num_bits();
    if n > guard {
        return Err(Error::BitGuardExceeded { bits: n, guard });
    }
    let start = Instant::now();
    let (diag, neighbors) = q.adjacency();
    let mut state = Search {
        q,
        diag: &diag,
        neighbors: &neighbors,
        bits: vec![false; n],
        energy: q.constant_offset,
        best_bits: vec![false; n],
        best_energy: q.constant_offset,
    };
    state.descend(0);
    let best_bits = state.best_bits;
    let best_energy = q.energy(&best_bits)?;
    Ok(SolveResult::new(best_bits, best_energy, start.elapsed()))
}

struct Search<'q, S: Scalar> {
    q: &'q QuboProblem<S>,
    diag: &'q [S],
    neighbors: &'q [Vec<(usize, S)>],
    bits: Vec<bool>,
    energy: S,
    best_bits: Vec<bool>,
    best_energy: S,
}

impl<S: Scalar> Search<'_, S> {
    fn descend(&mut self, depth: usize) {
        if depth == self.bits.len() {
            // strict `<` keeps the first (lexicographically smallest) optimum
            if self.energy < self.best_energy {
                self.best_energy = self.energy;
                self.best_bits.copy_from_slice(&self.bits);
            }
            return;
        }
        self.descend(depth + 1);
        let delta = self
            .q
            .flip_delta(&self.bits, depth, self.diag, self.neighbors);
        // snapshot-restore keeps float drift bounded by the path length
        let saved = self.energy;
        self.bits[depth] = true;
        self.energy = saved + delta;
        self.descend(depth + 1);
        self.bits[depth] = false;
        self.energy = saved;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_diagonal_example() {
        let mut q = QuboProblem::<f64>::new(2);
        q.add(0, 0, -1.0);
        q.add(1, 1, 2.0);
        let r = brute_force(&q).unwrap();
        assert_eq!(r.best_bits, vec![true, false]);
        assert_eq!(r.best_energy, -1.0);
    }

    #[test]
    fn positive_diagonal_stays_all_zero() {
        let mut q = QuboProblem::<f64>::new(3);
        q.constant_offset = 4.5;
        for i in 0..3 {
            q.add(i, i, 1.0 + i as f64);
        }
        let r = brute_force(&q).unwrap();
        assert_eq!(r.best_bits, vec![false, false, false]);
        assert_eq!(r.best_energy, 4.5);
    }

    #[test]
    fn degenerate_minima_take_the_lexicographically_smallest() {
        // energy(01) == energy(10) == -1, energy(00) = 0, energy(11) = 0
        let mut q = QuboProblem::<f64>::new(2);
        q.add(0, 0, -1.0);
        q.add(1, 1, -1.0);
        q.add(0, 1, 2.0);
        let r = brute_force(&q).unwrap();
        assert_eq!(r.best_bits, vec![false, true]);
        assert_eq!(r.best_energy, -1.0);
    }

    #[test]
    fn guard_refuses_oversized_problems() {
        let q = QuboProblem::<f64>::new(30);
        assert!(matches!(
            brute_force(&q),
            Err(Error::BitGuardExceeded { bits: 30, guard: 26 })
        ));
        assert!(brute_force_with_guard(&QuboProblem::<f64>::new(4), 3).is_err());
    }

    #[test]
    fn zero_bit_problem_returns_offset() {
        let mut q = QuboProblem::<f64>::new(0);
        q.constant_offset = -2.5;
        let r = brute_force(&q).unwrap();
        assert!(r.best_bits.is_empty());
        assert_eq!(r.best_energy, -2.5);
    }
}
