//! Solver-neutral intermediate representation: typed decision variables,
//! linear constraints, a linear objective, and bilinear exclusion pairs.
//!
//! Builders in [`crate::v2g`], [`crate::csp`], and [`crate::scenario`]
//! produce a [`StructuredModel`]; the QUBO transpiler and the solvers
//! consume it. Models are immutable once built and safe to share across
//! threads.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Feasibility tolerance applied to constraint residuals and bounds.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-6;

/// Index of a declared variable inside its model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

/// What a variable stands for in the source formulation. Used by the
/// encoding assignment and the hybrid solver's separability analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarRole {
    /// Charging power (kW).
    Charge,
    /// Discharging power (kW).
    Discharge,
    /// Battery state of charge (kWh).
    Soc,
    /// Charge/discharge on-off indicator.
    OnOff,
    /// Connection-to-location indicator.
    Presence,
    /// Edge traversal indicator.
    Traversal,
    /// Anything else.
    Generic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Variable<S> {
    pub name: String,
    pub kind: VarKind,
    pub role: VarRole,
    pub lower: S,
    pub upper: S,
}

impl<S: Scalar> Variable<S> {
    /// A variable with coinciding bounds is a constant of the model.
    pub fn is_fixed(&self) -> bool {
        self.lower == self.upper
    }
}

/// A linear expression `sum(coeff * var) + constant`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinExpr<S> {
    pub terms: Vec<(VarId, S)>,
    pub constant: S,
}

impl<S: Scalar> Default for LinExpr<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> LinExpr<S> {
    pub fn new() -> Self {
        Self {
            terms: Vec::new(),
            constant: S::zero(),
        }
    }

    pub fn with_term(mut self, var: VarId, coeff: S) -> Self {
        self.push(var, coeff);
        self
    }

    /// Appends a term, merging with an existing term on the same variable.
    pub fn push(&mut self, var: VarId, coeff: S) {
        if coeff == S::zero() {
            return;
        }
        if let Some(slot) = self.terms.iter_mut().find(|(v, _)| *v == var) {
            slot.1 = slot.1 + coeff;
        } else {
            self.terms.push((var, coeff));
        }
    }

    pub fn add_constant(&mut self, c: S) {
        self.constant = self.constant + c;
    }

    /// Value of the expression under dense per-variable values.
    pub fn value(&self, values: &[S]) -> S {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(VarId(v), c)| acc + c * values[v])
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty() && self.constant == S::zero()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Le => write!(f, "<="),
            Relation::Eq => write!(f, "="),
            Relation::Ge => write!(f, ">="),
        }
    }
}

/// Constraint families. Penalty weights and the hybrid decomposition are
/// keyed on these classes rather than on individual constraint labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConstraintClass {
    /// Battery state-of-charge recursion equalities.
    SocDynamics,
    /// Per-node EV connection capacity.
    EvCapacity,
    /// Charging power gated by its on-off / presence indicator.
    ChargeGate,
    /// Discharging power gated by its on-off / presence indicator.
    DischargeGate,
    /// Generation plus fleet discharge covers demand and spinning reserve.
    LoadBalance,
    /// Each vehicle connects to at most one location per step.
    SingleLocation,
    /// Aggregate active/reactive feeder limits.
    LineLimit,
    /// Fleet discharge at a node may not exceed the critical load there.
    CritCoverage,
    /// Travel-time exclusion between node pairs.
    Mobility,
    /// Departure/arrival consistency between presence and traversals.
    TravelLink,
    /// Anything else.
    Other,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint<S> {
    pub label: String,
    pub expr: LinExpr<S>,
    pub relation: Relation,
    pub rhs: S,
    pub class: ConstraintClass,
}

impl<S: Scalar> Constraint<S> {
    /// Signed residual `expr - rhs` under dense values.
    pub fn residual(&self, values: &[S]) -> S {
        self.expr.value(values) - self.rhs
    }

    /// Whether the residual satisfies the relation within `tol`.
    pub fn satisfied(&self, residual: S, tol: S) -> bool {
        match self.relation {
            Relation::Le => residual <= tol,
            Relation::Ge => residual >= -tol,
            Relation::Eq => residual.abs() <= tol,
        }
    }
}

/// The model IR. Variable order is the declaration order, which makes
/// model construction deterministic for identical inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuredModel<S> {
    pub name: String,
    variables: Vec<Variable<S>>,
    #[serde(skip)]
    index: HashMap<String, VarId>,
    pub constraints: Vec<Constraint<S>>,
    pub objective: LinExpr<S>,
    /// Pairs of binary variables whose product must be zero.
    pub bilinear_exclusions: Vec<(VarId, VarId)>,
}

impl<S: Scalar> StructuredModel<S> {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            variables: Vec::new(),
            index: HashMap::new(),
            constraints: Vec::new(),
            objective: LinExpr::new(),
            bilinear_exclusions: Vec::new(),
        }
    }

    pub fn add_variable(
        &mut self,
        name: impl Into<String>,
        kind: VarKind,
        role: VarRole,
        lower: S,
        upper: S,
    ) -> Result<VarId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::DuplicateVariable(name));
        }
        debug_assert!(lower <= upper, "bounds must satisfy lo <= hi");
        let id = VarId(self.variables.len());
        self.index.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            kind,
            role,
            lower,
            upper,
        });
        Ok(id)
    }

    pub fn add_binary(
        &mut self,
        name: impl Into<String>,
        role: VarRole,
    ) -> Result<VarId> {
        self.add_variable(name, VarKind::Binary, role, S::zero(), S::one())
    }

    pub fn add_constraint(
        &mut self,
        label: impl Into<String>,
        expr: LinExpr<S>,
        relation: Relation,
        rhs: S,
        class: ConstraintClass,
    ) {
        self.constraints.push(Constraint {
            label: label.into(),
            expr,
            relation,
            rhs,
            class,
        });
    }

    pub fn add_exclusion(&mut self, a: VarId, b: VarId) {
        self.bilinear_exclusions.push((a, b));
    }

    /// Pins a variable to a constant; downstream consumers fold it away.
    pub fn fix_variable(&mut self, id: VarId, value: S) {
        let v = &mut self.variables[id.0];
        v.lower = value;
        v.upper = value;
    }

    pub fn variables(&self) -> &[Variable<S>] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable<S> {
        &self.variables[id.0]
    }

    pub fn var_id(&self, name: &str) -> Result<VarId> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn count_kind(&self, kind: VarKind) -> usize {
        self.variables.iter().filter(|v| v.kind == kind).count()
    }

    pub fn count_role(&self, role: VarRole) -> usize {
        self.variables.iter().filter(|v| v.role == role).count()
    }

    pub fn count_class(&self, class: ConstraintClass) -> usize {
        self.constraints.iter().filter(|c| c.class == class).count()
    }

    /// Rebuilds the name index after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), VarId(i)))
            .collect();
    }

    /// Resolves an assignment to a dense value vector in variable order.
    pub fn dense_values(&self, a: &Assignment<S>) -> Result<Vec<S>> {
        self.variables
            .iter()
            .map(|v| {
                a.get(&v.name)
                    .ok_or_else(|| Error::MissingVariable(v.name.clone()))
            })
            .collect()
    }

    /// Deterministic plain-text dump of the whole model.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("model {}\n", self.name));
        out.push_str(&format!(
            "variables {} constraints {} exclusions {}\n",
            self.variables.len(),
            self.constraints.len(),
            self.bilinear_exclusions.len()
        ));
        for v in &self.variables {
            let kind = match v.kind {
                VarKind::Binary => "bin",
                VarKind::Continuous => "cont",
            };
            out.push_str(&format!(
                "var {} {} [{}, {}]\n",
                v.name, kind, v.lower, v.upper
            ));
        }
        for c in &self.constraints {
            let mut lhs = String::new();
            for (i, &(VarId(v), coeff)) in c.expr.terms.iter().enumerate() {
                if i > 0 {
                    lhs.push_str(" + ");
                }
                lhs.push_str(&format!("{}*{}", coeff, self.variables[v].name));
            }
            if c.expr.constant != S::zero() {
                if !c.expr.terms.is_empty() {
                    lhs.push_str(" + ");
                }
                lhs.push_str(&format!("{}", c.expr.constant));
            }
            out.push_str(&format!(
                "con {}: {} {} {}\n",
                c.label, lhs, c.relation, c.rhs
            ));
        }
        for &(a, b) in &self.bilinear_exclusions {
            out.push_str(&format!(
                "excl {} * {} = 0\n",
                self.variables[a.0].name, self.variables[b.0].name
            ));
        }
        let mut obj = String::new();
        for (i, &(VarId(v), coeff)) in self.objective.terms.iter().enumerate() {
            if i > 0 {
                obj.push_str(" + ");
            }
            obj.push_str(&format!("{}*{}", coeff, self.variables[v].name));
        }
        out.push_str(&format!(
            "min {} + {}\n",
            if obj.is_empty() { "0".into() } else { obj },
            self.objective.constant
        ));
        out
    }
}

/// A map from variable name to numeric value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment<S> {
    values: std::collections::BTreeMap<String, S>,
}

impl<S: Scalar> Assignment<S> {
    pub fn new() -> Self {
        Self {
            values: Default::default(),
        }
    }

    pub fn set(&mut self, name: impl Into<String>, value: S) {
        self.values.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<S> {
        self.values.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &S)> {
        self.values.iter()
    }

    /// Merges `other` into `self`, overwriting duplicates.
    pub fn absorb(&mut self, other: &Assignment<S>) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), *v);
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstraintResidual<S> {
    pub label: String,
    pub class: ConstraintClass,
    pub residual: S,
    pub violated: bool,
}

/// Result of evaluating an assignment against a model.
#[derive(Debug, Clone)]
pub struct ObjectiveReport<S> {
    pub objective: S,
    pub residuals: Vec<ConstraintResidual<S>>,
    pub violated_constraints: Vec<String>,
    /// Exclusion pairs where both variables are nonzero.
    pub exclusion_violations: Vec<(String, String)>,
    /// Variables outside their declared bounds, with the overshoot.
    pub bound_violations: Vec<(String, S)>,
    pub feasible: bool,
}

/// Evaluates `a` against `model` with the default feasibility tolerance.
pub fn evaluate<S: Scalar>(
    model: &StructuredModel<S>,
    a: &Assignment<S>,
) -> Result<ObjectiveReport<S>> {
    evaluate_with_tolerance(model, a, S::from_f64_lossy(FEASIBILITY_TOLERANCE))
}

/// Evaluates the objective, all constraint residuals, bound and exclusion
/// violations, and the resulting feasibility verdict.
pub fn evaluate_with_tolerance<S: Scalar>(
    model: &StructuredModel<S>,
    a: &Assignment<S>,
    tol: S,
) -> Result<ObjectiveReport<S>> {
    let values = model.dense_values(a)?;
    let objective = model.objective.value(&values);

    let mut residuals = Vec::with_capacity(model.constraints.len());
    let mut violated_constraints = Vec::new();
    for c in &model.constraints {
        let residual = c.residual(&values);
        let ok = c.satisfied(residual, tol);
        if !ok {
            violated_constraints.push(c.label.clone());
        }
        residuals.push(ConstraintResidual {
            label: c.label.clone(),
            class: c.class,
            residual,
            violated: !ok,
        });
    }

    let mut bound_violations = Vec::new();
    for (i, v) in model.variables().iter().enumerate() {
        let x = values[i];
        let over = if x < v.lower {
            v.lower - x
        } else if x > v.upper {
            x - v.upper
        } else {
            S::zero()
        };
        if over > tol {
            bound_violations.push((v.name.clone(), over));
        } else if v.kind == VarKind::Binary {
            // binaries must sit at 0 or 1, not merely inside [0,1]
            let dist = x.min((x - S::one()).abs()).abs();
            if dist > tol {
                bound_violations.push((v.name.clone(), dist));
            }
        }
    }

    let mut exclusion_violations = Vec::new();
    for &(pa, pb) in &model.bilinear_exclusions {
        let va = values[pa.0];
        let vb = values[pb.0];
        if va.abs() > tol && vb.abs() > tol {
            exclusion_violations.push((
                model.variable(pa).name.clone(),
                model.variable(pb).name.clone(),
            ));
        }
    }

    let feasible = violated_constraints.is_empty()
        && bound_violations.is_empty()
        && exclusion_violations.is_empty();

    Ok(ObjectiveReport {
        objective,
        residuals,
        violated_constraints,
        exclusion_violations,
        bound_violations,
        feasible,
    })
}
