//! Constrained-space oracle over the discretized model.
//!
//! Enumerates only encoding-valid level combinations (at most one level
//! per one-hot group), rejects constraint-violating combinations
//! directly — no penalties, no slack bits — and returns the
//! minimum-objective feasible assignment. Enumeration follows the
//! lexicographic order of the corresponding QUBO bitstrings, so tie
//! breaking agrees with [`super::brute_force`].

use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{Assignment, Relation, StructuredModel, VarKind};
use crate::qubo::EncodingSet;
use crate::scalar::Scalar;

use super::DEFAULT_BIT_GUARD;

#[derive(Debug, Clone)]
pub enum ReferenceOutcome<S> {
    Optimal {
        assignment: Assignment<S>,
        objective: S,
    },
    /// No encoding-valid combination satisfies every constraint.
    Infeasible,
}

impl<S: Scalar> ReferenceOutcome<S> {
    pub fn objective(&self) -> Option<S> {
        match self {
            ReferenceOutcome::Optimal { objective, .. } => Some(*objective),
            ReferenceOutcome::Infeasible => None,
        }
    }
}

pub fn exact_discrete_reference<S: Scalar>(
    model: &StructuredModel<S>,
    encodings: &EncodingSet<S>,
) -> Result<ReferenceOutcome<S>> {
    exact_discrete_reference_with_guard(model, encodings, DEFAULT_BIT_GUARD)
}

pub fn exact_discrete_reference_with_guard<S: Scalar>(
    model: &StructuredModel<S>,
    encodings: &EncodingSet<S>,
    guard: usize,
) -> Result<ReferenceOutcome<S>> {
    let _ = Instant::now();
    let feas_tol = S::from_f64_lossy(crate::model::FEASIBILITY_TOLERANCE);

    // candidate values per variable, ordered to mirror lexicographic
    // bitstring order: all-zero first, then single set bits left to right
    // (which is the highest level down to level 1)
    let mut choices: Vec<Vec<S>> = Vec::with_capacity(model.num_variables());
    let mut total_bits = 0usize;
    for var in model.variables() {
        if var.is_fixed() {
            choices.push(vec![var.lower]);
            continue;
        }
        match var.kind {
            VarKind::Binary => {
                total_bits += 1;
                choices.push(vec![S::zero(), S::one()]);
            }
            VarKind::Continuous => {
                let enc = encodings
                    .get(&var.name)
                    .ok_or_else(|| Error::UnencodedVariable(var.name.clone()))?;
                if enc.offset < var.lower - feas_tol || enc.max_value() > var.upper + feas_tol {
                    return Err(Error::InvalidEncoding(format!(
                        "encoding of `{}` exceeds its bounds",
                        var.name
                    )));
                }
                total_bits += enc.num_bits();
                let mut vals = Vec::with_capacity(enc.levels);
                vals.push(enc.value_at(0));
                for level in (1..enc.levels).rev() {
                    vals.push(enc.value_at(level));
                }
                choices.push(vals);
            }
        }
    }
    if total_bits > guard {
        return Err(Error::BitGuardExceeded {
            bits: total_bits,
            guard,
        });
    }

    // constraint adjacency for incremental residual sums
    let mut adjacency: Vec<Vec<(usize, S)>> = vec![Vec::new(); model.num_variables()];
    let mut sums: Vec<S> = Vec::with_capacity(model.constraints.len());
    for (ci, c) in model.constraints.iter().enumerate() {
        sums.push(c.expr.constant);
        for &(id, coeff) in &c.expr.terms {
            adjacency[id.0].push((ci, coeff));
        }
    }
    let mut obj_adjacency: Vec<S> = vec![S::zero(); model.num_variables()];
    for &(id, coeff) in &model.objective.terms {
        obj_adjacency[id.0] = obj_adjacency[id.0] + coeff;
    }

    let saved_sums: Vec<Vec<S>> = adjacency
        .iter()
        .map(|adj| vec![S::zero(); adj.len()])
        .collect();
    let mut search = Search {
        model,
        choices: &choices,
        adjacency: &adjacency,
        obj_adjacency: &obj_adjacency,
        values: vec![S::zero(); model.num_variables()],
        sums,
        objective: model.objective.constant,
        feas_tol,
        best: None,
        saved_sums,
        saved_obj: vec![S::zero(); model.num_variables()],
    };
    search.descend(0);

    match search.best {
        Some((objective, values)) => {
            let mut assignment = Assignment::new();
            for (var, &value) in model.variables().iter().zip(&values) {
                assignment.set(var.name.clone(), value);
            }
            Ok(ReferenceOutcome::Optimal {
                assignment,
                objective,
            })
        }
        None => Ok(ReferenceOutcome::Infeasible),
    }
}

struct Search<'m, S: Scalar> {
    model: &'m StructuredModel<S>,
    choices: &'m [Vec<S>],
    adjacency: &'m [Vec<(usize, S)>],
    obj_adjacency: &'m [S],
    values: Vec<S>,
    sums: Vec<S>,
    objective: S,
    feas_tol: S,
    best: Option<(S, Vec<S>)>,
    /// Per-depth snapshots so sibling branches restore exactly instead of
    /// accumulating add/subtract float drift.
    saved_sums: Vec<Vec<S>>,
    saved_obj: Vec<S>,
}

impl<S: Scalar> Search<'_, S> {
    fn descend(&mut self, depth: usize) {
        if depth == self.values.len() {
            self.take_leaf();
            return;
        }
        let adjacency = self.adjacency;
        for (k, &(ci, _)) in adjacency[depth].iter().enumerate() {
            self.saved_sums[depth][k] = self.sums[ci];
        }
        self.saved_obj[depth] = self.objective;
        for i in 0..self.choices[depth].len() {
            let value = self.choices[depth][i];
            self.values[depth] = value;
            for (k, &(ci, coeff)) in adjacency[depth].iter().enumerate() {
                self.sums[ci] = self.saved_sums[depth][k] + coeff * value;
            }
            self.objective = self.saved_obj[depth] + self.obj_adjacency[depth] * value;
            self.descend(depth + 1);
        }
        self.values[depth] = S::zero();
        for (k, &(ci, _)) in adjacency[depth].iter().enumerate() {
            self.sums[ci] = self.saved_sums[depth][k];
        }
        self.objective = self.saved_obj[depth];
    }

    fn take_leaf(&mut self) {
        if let Some((best_obj, _)) = &self.best {
            if self.objective >= *best_obj {
                return;
            }
        }
        for (ci, c) in self.model.constraints.iter().enumerate() {
            let residual = self.sums[ci] - c.rhs;
            let ok = match c.relation {
                Relation::Le => residual <= self.feas_tol,
                Relation::Ge => residual >= -self.feas_tol,
                Relation::Eq => residual.abs() <= self.feas_tol,
            };
            if !ok {
                return;
            }
        }
        for &(a, b) in &self.model.bilinear_exclusions {
            if self.values[a.0].abs() > self.feas_tol && self.values[b.0].abs() > self.feas_tol {
                return;
            }
        }
        self.best = Some((self.objective, self.values.clone()));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::evaluate;
    use crate::qubo::{decode, transpile, InequalityMode, PenaltyConfig};
    use crate::solve::brute_force;
    use crate::v2g::test_fixtures::commensurate_instance;
    use crate::v2g::{add_resilience_constraints, build_v2g_model};

    #[test]
    fn oracle_agrees_with_brute_forced_qubo_in_both_directions() {
        let instance = commensurate_instance();
        let model = build_v2g_model(&instance).unwrap();
        let encodings = EncodingSet::for_model(&model, 2, 3).unwrap();

        let reference = exact_discrete_reference(&model, &encodings).unwrap();
        let ReferenceOutcome::Optimal {
            assignment: ref_assignment,
            objective: ref_objective,
        } = reference
        else {
            panic!("reference reports infeasible");
        };

        let config =
            PenaltyConfig::dominant_for(&model, &encodings, InequalityMode::SlackBits).unwrap();
        let (q, map) = transpile(&model, config, &encodings).unwrap();
        let ground = brute_force(&q).unwrap();
        let decoded = decode(&ground.best_bits, &map).unwrap();
        assert!(decoded.multi_hot.is_empty());

        let report = evaluate(&model, &decoded.assignment).unwrap();
        assert!(report.feasible, "qubo ground state decodes infeasible");
        assert_eq!(report.objective, ref_objective);

        // charging at the cheap step then selling at the expensive one
        // beats idling
        assert!(ref_objective < 0.0);
        let ref_report = evaluate(&model, &ref_assignment).unwrap();
        assert!(ref_report.feasible);
        assert_eq!(ref_report.objective, ref_objective);
    }

    #[test]
    fn fixed_soc_with_forced_discharge_is_infeasible() {
        let mut instance = commensurate_instance();
        instance.fleet[0].soc_min_kwh = 3.0;
        instance.fleet[0].soc_max_kwh = 3.0;
        instance.fleet[0].soc_initial_kwh = 3.0;
        // force discharge through the load balance: demand exceeds generation
        instance.limits.demand_kw = vec![6.0, 0.0];
        let model = build_v2g_model(&instance).unwrap();
        let model = add_resilience_constraints(model, &instance).unwrap();
        let encodings = EncodingSet::for_model(&model, 2, 3).unwrap();
        let outcome = exact_discrete_reference(&model, &encodings).unwrap();
        assert!(matches!(outcome, ReferenceOutcome::Infeasible));
    }

    #[test]
    fn zero_prices_make_idle_optimal() {
        let mut instance = commensurate_instance();
        instance.prices.charge_per_kwh = vec![0.0, 0.0];
        instance.prices.discharge_per_kwh = vec![0.0, 0.0];
        let model = build_v2g_model(&instance).unwrap();
        let encodings = EncodingSet::for_model(&model, 2, 3).unwrap();
        let outcome = exact_discrete_reference(&model, &encodings).unwrap();
        assert_eq!(outcome.objective(), Some(0.0));
    }

    #[test]
    fn guard_refuses_oversized_models() {
        let instance = commensurate_instance();
        let model = build_v2g_model(&instance).unwrap();
        let encodings = EncodingSet::for_model(&model, 2, 3).unwrap();
        assert!(matches!(
            exact_discrete_reference_with_guard(&model, &encodings, 3),
            Err(Error::BitGuardExceeded { .. })
        ));
    }

    #[test]
    fn raising_discharge_price_never_worsens_the_optimum() {
        // price monotonicity against the enumerating oracle
        let base = commensurate_instance();
        let model = build_v2g_model(&base).unwrap();
        let encodings = EncodingSet::for_model(&model, 2, 3).unwrap();
        let base_obj = exact_discrete_reference(&model, &encodings)
            .unwrap()
            .objective()
            .unwrap();
        for t in 0..2 {
            for bump in [0.05, 0.2, 1.0] {
                let mut raised = base.clone();
                raised.prices.discharge_per_kwh[t] += bump;
                let model = build_v2g_model(&raised).unwrap();
                let obj = exact_discrete_reference(&model, &encodings)
                    .unwrap()
                    .objective()
                    .unwrap();
                assert!(
                    obj <= base_obj + 1e-12,
                    "raising r_dis[{t}] by {bump} worsened {base_obj} -> {obj}"
                );
            }
        }
    }
}
