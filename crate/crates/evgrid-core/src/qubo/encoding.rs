//! One-hot discretization of continuous model variables.
//!
//! A variable with `K` levels is carried by `K - 1` bits: level 0 (value
//! `offset`) is the all-zero state, and setting the bit for level `k`
//! decodes to `offset + step * k`. Power variables use `step = p_max / K`,
//! which deliberately leaves `p_max` itself unrepresentable (the largest
//! level is `(K-1) * p_max / K`). State-of-charge variables instead pick
//! the step so both box bounds are exactly representable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{StructuredModel, VarKind, VarRole};
use crate::scalar::Scalar;
use crate::v2g::VehicleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneHotEncoding<S> {
    /// Number of representable levels, including level 0.
    pub levels: usize,
    /// Physical units per level.
    pub step: S,
    /// Physical value at level 0.
    pub offset: S,
}

impl<S: Scalar> OneHotEncoding<S> {
    pub fn num_bits(&self) -> usize {
        self.levels - 1
    }

    pub fn value_at(&self, level: usize) -> S {
        self.offset + self.step * S::from_usize_lossy(level)
    }

    pub fn max_value(&self) -> S {
        self.value_at(self.levels - 1)
    }

    /// All representable values, lowest first.
    pub fn values(&self) -> impl Iterator<Item = S> + '_ {
        (0..self.levels).map(|k| self.value_at(k))
    }

    /// Level index whose value matches `v` exactly (within `tol`).
    pub fn level_of(&self, v: S, tol: S) -> Option<usize> {
        (0..self.levels).find(|&k| (self.value_at(k) - v).abs() <= tol)
    }
}

/// Power encoding with `step = p_max / levels` and offset 0.
pub fn make_power_encoding<S: Scalar>(p_max: S, levels: usize) -> Result<OneHotEncoding<S>> {
    if levels < 2 {
        return Err(Error::InvalidEncoding(format!(
            "need at least 2 levels, got {levels}"
        )));
    }
    if p_max <= S::zero() {
        return Err(Error::InvalidEncoding("p_max must be > 0".into()));
    }
    Ok(OneHotEncoding {
        levels,
        step: p_max / S::from_usize_lossy(levels),
        offset: S::zero(),
    })
}

/// State-of-charge encoding: offset at `soc_min`, step chosen so
/// `soc_max` is the top level.
pub fn make_soc_encoding<S: Scalar>(
    vehicle: &VehicleSpec<S>,
    levels: usize,
) -> Result<OneHotEncoding<S>> {
    make_range_encoding(vehicle.soc_min_kwh, vehicle.soc_max_kwh, levels)
}

/// Encoding spanning `[lo, hi]` with both ends representable.
pub fn make_range_encoding<S: Scalar>(lo: S, hi: S, levels: usize) -> Result<OneHotEncoding<S>> {
    if levels < 2 {
        return Err(Error::InvalidEncoding(format!(
            "need at least 2 levels, got {levels}"
        )));
    }
    if hi <= lo {
        return Err(Error::InvalidEncoding(
            "range is empty: upper bound must exceed lower bound".into(),
        ));
    }
    Ok(OneHotEncoding {
        levels,
        step: (hi - lo) / S::from_usize_lossy(levels - 1),
        offset: lo,
    })
}

/// Per-variable encodings for a model, keyed by variable name.
#[derive(Debug, Clone, Default)]
pub struct EncodingSet<S> {
    map: BTreeMap<String, OneHotEncoding<S>>,
}

impl<S: Scalar> EncodingSet<S> {
    pub fn new() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, var: impl Into<String>, enc: OneHotEncoding<S>) {
        self.map.insert(var.into(), enc);
    }

    pub fn get(&self, var: &str) -> Option<&OneHotEncoding<S>> {
        self.map.get(var)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Assigns an encoding to every non-fixed continuous variable:
    /// power-style (`step = upper / levels`) for charge/discharge and any
    /// generic variable anchored at zero, range-style otherwise (both
    /// bounds representable), with `soc_levels` for state-of-charge
    /// variables.
    pub fn for_model(
        model: &StructuredModel<S>,
        levels: usize,
        soc_levels: usize,
    ) -> Result<Self> {
        let mut set = Self::new();
        for v in model.variables() {
            if v.kind != VarKind::Continuous || v.lower == v.upper {
                continue;
            }
            let enc = match v.role {
                VarRole::Soc => make_range_encoding(v.lower, v.upper, soc_levels)?,
                VarRole::Charge | VarRole::Discharge => make_power_encoding(v.upper, levels)?,
                _ => {
                    if v.lower == S::zero() {
                        make_power_encoding(v.upper, levels)?
                    } else {
                        make_range_encoding(v.lower, v.upper, levels)?
                    }
                }
            };
            set.insert(v.name.clone(), enc);
        }
        Ok(set)
    }

    /// Total bits the mapped variables will occupy, before slack bits.
    pub fn total_bits(&self) -> usize {
        self.map.values().map(|e| e.num_bits()).sum()
    }
}
