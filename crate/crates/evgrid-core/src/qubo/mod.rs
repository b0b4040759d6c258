//! Quadratic unconstrained binary optimization problems: the sparse
//! upper-triangular coefficient map, energy evaluation, and the plain-text
//! coordinate-list exchange format.

pub mod encoding;
pub mod transpile;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use encoding::{make_power_encoding, make_soc_encoding, EncodingSet, OneHotEncoding};
pub use transpile::{
    decode, penalty_audit, transpile, DecodedAssignment, InequalityMode, PenaltyAudit,
    PenaltyConfig, VariableMap,
};

/// A QUBO: minimize `sum_{i<=j} Q[i][j] b_i b_j + constant_offset` over
/// bit vectors `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem<S> {
    num_bits: usize,
    coefficients: BTreeMap<(u32, u32), S>,
    pub constant_offset: S,
}

impl<S: Scalar> QuboProblem<S> {
    pub fn new(num_bits: usize) -> Self {
        Self {
            num_bits,
            coefficients: BTreeMap::new(),
            constant_offset: S::zero(),
        }
    }

    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    /// Adds `value` onto the coefficient of `b_i * b_j`, normalizing the
    /// key to the upper triangle.
    pub fn add(&mut self, i: usize, j: usize, value: S) {
        if value == S::zero() {
            return;
        }
        let key = if i <= j {
            (i as u32, j as u32)
        } else {
            (j as u32, i as u32)
        };
        debug_assert!((key.1 as usize) < self.num_bits, "bit index out of range");
        let slot = self.coefficients.entry(key).or_insert_with(S::zero);
        *slot = *slot + value;
    }

    /// Removes coefficients that cancelled to exactly zero.
    pub fn prune_zeros(&mut self) {
        self.coefficients.retain(|_, v| *v != S::zero());
    }

    pub fn coefficient(&self, i: usize, j: usize) -> S {
        let key = if i <= j {
            (i as u32, j as u32)
        } else {
            (j as u32, i as u32)
        };
        self.coefficients.get(&key).copied().unwrap_or_else(S::zero)
    }

    /// Sorted iteration over `(i, j, value)` with `i <= j`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, S)> + '_ {
        self.coefficients
            .iter()
            .map(|(&(i, j), &v)| (i as usize, j as usize, v))
    }

    pub fn num_terms(&self) -> usize {
        self.coefficients.len()
    }

    /// Energy of a bitstring: terms are accumulated in sorted index-pair
    /// order starting from the constant offset.
    pub fn energy(&self, bits: &[bool]) -> Result<S> {
        if bits.len() != self.num_bits {
            return Err(Error::BitLength {
                got: bits.len(),
                expected: self.num_bits,
            });
        }
        let mut acc = self.constant_offset;
        for (&(i, j), &v) in &self.coefficients {
            if bits[i as usize] && bits[j as usize] {
                acc = acc + v;
            }
        }
        Ok(acc)
    }

    /// Per-bit adjacency `(other, coefficient)` plus the diagonal, for
    /// incremental flip-delta computation.
    pub fn adjacency(&self) -> (Vec<S>, Vec<Vec<(usize, S)>>) {
        let mut diag = vec![S::zero(); self.num_bits];
        let mut neighbors = vec![Vec::new(); self.num_bits];
        for (&(i, j), &v) in &self.coefficients {
            let (i, j) = (i as usize, j as usize);
            if i == j {
                diag[i] = diag[i] + v;
            } else {
                neighbors[i].push((j, v));
                neighbors[j].push((i, v));
            }
        }
        (diag, neighbors)
    }

    /// Energy change from flipping `bit` in `bits`, using precomputed
    /// adjacency.
    pub fn flip_delta(
        &self,
        bits: &[bool],
        bit: usize,
        diag: &[S],
        neighbors: &[Vec<(usize, S)>],
    ) -> S {
        let mut local = diag[bit];
        for &(other, coeff) in &neighbors[bit] {
            if bits[other] {
                local = local + coeff;
            }
        }
        if bits[bit] {
            -local
        } else {
            local
        }
    }

    /// Plain-text coordinate list: header `#bits N offset C`, then one
    /// line `i j value` per coefficient with `i <= j`, 0-based, sorted.
    pub fn export_coordinate(&self) -> String {
        let mut out = format!("#bits {} offset {}\n", self.num_bits, self.constant_offset);
        for (&(i, j), &v) in &self.coefficients {
            out.push_str(&format!("{i} {j} {v}\n"));
        }
        out
    }

    pub fn import_coordinate(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::QuboParse {
            line: 1,
            message: "empty input".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "#bits" || fields[2] != "offset" {
            return Err(Error::QuboParse {
                line: 1,
                message: "expected header `#bits N offset C`".into(),
            });
        }
        let num_bits: usize = fields[1].parse().map_err(|_| Error::QuboParse {
            line: 1,
            message: format!("bad bit count `{}`", fields[1]),
        })?;
        let offset: f64 = fields[3].parse().map_err(|_| Error::QuboParse {
            line: 1,
            message: format!("bad offset `{}`", fields[3]),
        })?;
        let mut q = QuboProblem::new(num_bits);
        q.constant_offset = S::from_f64_lossy(offset);
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::QuboParse {
                    line: idx + 1,
                    message: "expected `i j value`".into(),
                });
            }
            let i: usize = parts[0].parse().map_err(|_| Error::QuboParse {
                line: idx + 1,
                message: format!("bad index `{}`", parts[0]),
            })?;
            let j: usize = parts[1].parse().map_err(|_| Error::QuboParse {
                line: idx + 1,
                message: format!("bad index `{}`", parts[1]),
            })?;
            let value: f64 = parts[2].parse().map_err(|_| Error::QuboParse {
                line: idx + 1,
                message: format!("bad value `{}`", parts[2]),
            })?;
            if i > j || j >= num_bits {
                return Err(Error::QuboParse {
                    line: idx + 1,
                    message: format!("index pair ({i}, {j}) outside upper triangle"),
                });
            }
            q.add(i, j, S::from_f64_lossy(value));
        }
        Ok(q)
    }
}

/// Energy of `bits` under `q`; the free-function spelling of
/// [`QuboProblem::energy`].
pub fn qubo_energy<S: Scalar>(q: &QuboProblem<S>, bits: &[bool]) -> Result<S> {
    q.energy(bits)
}
