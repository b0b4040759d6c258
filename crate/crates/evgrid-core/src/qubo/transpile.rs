//! StructuredModel -> QUBO translation via one-hot discretization and
//! squared penalties, plus the reverse decode and a per-constraint
//! penalty audit.
//!
//! Constraint handling, in precedence order:
//!
//! * power gates `P - c*flag <= 0` become the exact product penalty
//!   `lambda * sum_k b_k * (1 - flag)` in both inequality modes — no
//!   slack bits, zero iff the gate holds under the encoding;
//! * in [`InequalityMode::SlackBits`], unit-coefficient count bounds
//!   (`sum z <= 1`, `sum z <= 0`) become pairwise products / linear
//!   penalties, and every other inequality gains a one-hot slack whose
//!   representable values are the exactly achievable residuals, turning
//!   the inequality into a squared equality;
//! * in [`InequalityMode::PaperVerbatim`], non-gate inequalities are
//!   squared directly. That penalizes strictly feasible interiors (an
//!   assignment using less than the allowed capacity still pays), which
//!   is the comparison point the benchmark exposes;
//! * equalities are always `lambda * residual^2`;
//! * one-hot validity adds `lambda_oh * sum_{k<k'} b_k b_k'` per encoded
//!   variable and per slack;
//! * each bilinear exclusion pair adds `lambda_xy` times the product of
//!   the two indicator bits.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::{
    Assignment, Constraint, ConstraintClass, LinExpr, Relation, StructuredModel, VarKind,
};
use crate::scalar::Scalar;

use super::encoding::EncodingSet;
use super::QuboProblem;

/// Maximum number of distinct achievable residuals before the slack
/// construction falls back to a uniform grid.
const SLACK_VALUE_CAP: usize = 512;
/// Bits allotted to a fallback uniform slack grid.
const SLACK_FALLBACK_BITS: usize = 16;
/// Merge tolerance for achievable-residual deduplication.
const VALUE_MERGE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityMode {
    /// One-hot slack variables convert inequalities to equalities.
    SlackBits,
    /// Inequality residuals are squared as-is.
    PaperVerbatim,
}

/// Per-constraint-class penalty weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig<S> {
    /// Weight on the battery-dynamics equalities.
    pub soc_dynamics: S,
    /// Weight on node EV-capacity constraints.
    pub ev_capacity: S,
    /// Weight on every other constraint class.
    pub default_class: S,
    /// Weight on one-hot validity products.
    pub one_hot: S,
    /// Weight on charge/discharge exclusion products.
    pub exclusion: S,
    pub inequality_mode: InequalityMode,
}

impl<S: Scalar> PenaltyConfig<S> {
    pub fn uniform(lambda: S, inequality_mode: InequalityMode) -> Self {
        Self {
            soc_dynamics: lambda,
            ev_capacity: lambda,
            default_class: lambda,
            one_hot: lambda,
            exclusion: lambda,
            inequality_mode,
        }
    }

    /// All weights at the dominance bound of the model, above which any
    /// single violation outweighs any objective gain (for violation
    /// quanta of at least one unit).
    pub fn dominant_for(
        model: &StructuredModel<S>,
        encodings: &EncodingSet<S>,
        inequality_mode: InequalityMode,
    ) -> Result<Self> {
        Ok(Self::uniform(
            dominance_bound(model, encodings)?,
            inequality_mode,
        ))
    }

    pub fn with_scale(mut self, factor: S) -> Self {
        self.soc_dynamics = self.soc_dynamics * factor;
        self.ev_capacity = self.ev_capacity * factor;
        self.default_class = self.default_class * factor;
        self.one_hot = self.one_hot * factor;
        self.exclusion = self.exclusion * factor;
        self
    }

    pub fn class_weight(&self, class: ConstraintClass) -> S {
        match class {
            ConstraintClass::SocDynamics => self.soc_dynamics,
            ConstraintClass::EvCapacity => self.ev_capacity,
            _ => self.default_class,
        }
    }
}

/// `|constant| + sum |coeff| * max |value|` of the objective over the
/// encoded box.
pub fn objective_abs_bound<S: Scalar>(
    model: &StructuredModel<S>,
    encodings: &EncodingSet<S>,
) -> Result<S> {
    Ok(model.objective.constant.abs() + objective_span(model, encodings)?)
}

/// Dominance bound `1 + sum |coeff| * max |value|`: with it as the
/// penalty weight, any violated penalty term (violation quantum >= 1)
/// exceeds the largest possible objective spread.
pub fn dominance_bound<S: Scalar>(
    model: &StructuredModel<S>,
    encodings: &EncodingSet<S>,
) -> Result<S> {
    Ok(S::one() + objective_span(model, encodings)?)
}

fn objective_span<S: Scalar>(
    model: &StructuredModel<S>,
    encodings: &EncodingSet<S>,
) -> Result<S> {
    let mut span = S::zero();
    for &(id, coeff) in &model.objective.terms {
        let var = model.variable(id);
        let max_abs = if var.is_fixed() {
            var.lower.abs()
        } else {
            match var.kind {
                VarKind::Binary => S::one(),
                VarKind::Continuous => {
                    let enc = encodings
                        .get(&var.name)
                        .ok_or_else(|| Error::UnencodedVariable(var.name.clone()))?;
                    enc.offset.abs().max(enc.max_value().abs())
                }
            }
        };
        span = span + coeff.abs() * max_abs;
    }
    Ok(span)
}

// ---------------------------------------------------------------------------
// bit-space bookkeeping
// ---------------------------------------------------------------------------

/// Bits carrying one encoded variable (or one slack). Setting `bits[j]`
/// contributes `deltas[j]` on top of `base`.
#[derive(Debug, Clone)]
pub struct BitGroup<S> {
    pub bits: Vec<usize>,
    pub base: S,
    pub deltas: Vec<S>,
}

impl<S: Scalar> BitGroup<S> {
    /// Substituted value: base plus every set bit's contribution. Equals
    /// the decoded value exactly when at most one bit is set.
    pub fn raw_value(&self, bits: &[bool]) -> S {
        self.bits
            .iter()
            .zip(&self.deltas)
            .filter(|&(&b, _)| bits[b])
            .fold(self.base, |acc, (_, &d)| acc + d)
    }

    pub fn set_count(&self, bits: &[bool]) -> usize {
        self.bits.iter().filter(|&&b| bits[b]).count()
    }

    /// Decoded value with the lowest-set-level tie break.
    pub fn decoded_value(&self, bits: &[bool]) -> S {
        match self.bits.iter().position(|&b| bits[b]) {
            Some(j) => self.base + self.deltas[j],
            None => self.base,
        }
    }
}

#[derive(Debug, Clone)]
pub enum VarBinding<S> {
    Fixed(S),
    Bit(usize),
    Group(BitGroup<S>),
}

/// A linear form over bits: `constant + sum coeff * bit`.
#[derive(Debug, Clone, Default)]
pub struct BitLinear<S> {
    pub constant: S,
    pub terms: Vec<(usize, S)>,
}

impl<S: Scalar> BitLinear<S> {
    fn new() -> Self {
        Self {
            constant: S::zero(),
            terms: Vec::new(),
        }
    }

    pub fn eval(&self, bits: &[bool]) -> S {
        self.terms
            .iter()
            .filter(|&&(b, _)| bits[b])
            .fold(self.constant, |acc, &(_, c)| acc + c)
    }
}

#[derive(Debug, Clone)]
pub enum PenaltyKind {
    /// Constraint held by construction (no free bits, satisfied constant).
    Skipped,
    /// Constraint violated by construction; penalty is a constant.
    ConstantViolation,
    /// `lambda * residual^2` of an equality.
    Equality,
    /// `lambda * (residual +/- slack)^2`; slack terms are folded into
    /// `residual_bits`.
    SlackInequality { slack_index: usize },
    /// `lambda * residual^2` of an inequality (paper-verbatim mode).
    Verbatim,
    /// `lambda * sum_k b_k * (1 - flag)`.
    Gate {
        power_bits: Vec<usize>,
        flag_bit: usize,
    },
    /// `lambda * sum_{i<j} b_i b_j`.
    AtMostOne { bits: Vec<usize> },
    /// `lambda * sum b_i` — a count bound of zero.
    ForceZero { bits: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct PenaltyRecord<S> {
    pub label: String,
    pub class: ConstraintClass,
    pub lambda: S,
    pub kind: PenaltyKind,
    /// Residual as a linear form over bits (meaningful for the squared
    /// kinds; constant-only for `ConstantViolation`).
    pub residual_bits: BitLinear<S>,
}

#[derive(Debug, Clone)]
pub struct SlackGroup<S> {
    pub constraint_label: String,
    pub group: BitGroup<S>,
}

#[derive(Debug, Clone)]
enum ExclusionBits {
    /// Product penalty across the two bit sets.
    Pairs(Vec<usize>, Vec<usize>),
    /// One side is constant-nonzero: penalize the other side's bits.
    LinearOn(Vec<usize>),
    /// Both sides constant; `true` means the exclusion is violated.
    Constant(bool),
}

#[derive(Debug, Clone)]
struct ExclusionRecord {
    a: String,
    b: String,
    bits: ExclusionBits,
}

#[derive(Debug, Clone)]
struct OneHotGroup {
    owner: String,
    bits: Vec<usize>,
}

/// Bidirectional mapping between model variables and QUBO bits, plus the
/// registry needed to audit penalties per constraint.
#[derive(Debug, Clone)]
pub struct VariableMap<S> {
    names: Vec<String>,
    bindings: Vec<VarBinding<S>>,
    by_name: HashMap<String, usize>,
    num_bits: usize,
    bit_names: Vec<String>,
    slacks: Vec<SlackGroup<S>>,
    one_hot_groups: Vec<OneHotGroup>,
    penalties: Vec<PenaltyRecord<S>>,
    exclusions: Vec<ExclusionRecord>,
    objective_bits: BitLinear<S>,
    lambda_one_hot: S,
    lambda_exclusion: S,
}

impl<S: Scalar> VariableMap<S> {
    pub fn num_bits(&self) -> usize {
        self.num_bits
    }

    pub fn bit_name(&self, bit: usize) -> &str {
        &self.bit_names[bit]
    }

    pub fn bit_names(&self) -> &[String] {
        &self.bit_names
    }

    pub fn binding(&self, var: &str) -> Option<&VarBinding<S>> {
        self.by_name.get(var).map(|&i| &self.bindings[i])
    }

    /// Global bit indices of a variable, empty for fixed variables.
    pub fn bits_of(&self, var: &str) -> Vec<usize> {
        match self.binding(var) {
            Some(VarBinding::Bit(b)) => vec![*b],
            Some(VarBinding::Group(g)) => g.bits.clone(),
            _ => Vec::new(),
        }
    }

    pub fn slack_groups(&self) -> &[SlackGroup<S>] {
        &self.slacks
    }

    pub fn penalty_records(&self) -> &[PenaltyRecord<S>] {
        &self.penalties
    }

    pub fn num_slack_bits(&self) -> usize {
        self.slacks.iter().map(|s| s.group.bits.len()).sum()
    }
}

// ---------------------------------------------------------------------------
// transpile
// ---------------------------------------------------------------------------

struct Assembler<S: Scalar> {
    config: PenaltyConfig<S>,
    bindings: Vec<VarBinding<S>>,
    bit_names: Vec<String>,
    next_bit: usize,
}

impl<S: Scalar> Assembler<S> {
    fn alloc_bit(&mut self, name: String) -> usize {
        let b = self.next_bit;
        self.next_bit += 1;
        self.bit_names.push(name);
        b
    }

    /// Folds an expression into bit space using the variable bindings.
    fn bitize(&self, expr: &LinExpr<S>) -> BitLinear<S> {
        let mut out = BitLinear::new();
        out.constant = expr.constant;
        for &(id, coeff) in &expr.terms {
            match &self.bindings[id.0] {
                VarBinding::Fixed(v) => out.constant = out.constant + coeff * *v,
                VarBinding::Bit(b) => out.terms.push((*b, coeff)),
                VarBinding::Group(g) => {
                    out.constant = out.constant + coeff * g.base;
                    for (&b, &d) in g.bits.iter().zip(&g.deltas) {
                        out.terms.push((b, coeff * d));
                    }
                }
            }
        }
        out
    }

    /// Achievable values of `expr - rhs` over valid (one-hot) states.
    /// Returns `None` when the distinct-value cap is exceeded.
    fn achievable_residuals(&self, c: &Constraint<S>) -> Option<Vec<S>> {
        let mut values: Vec<S> = vec![-c.rhs + c.expr.constant];
        for &(id, coeff) in &c.expr.terms {
            let choices: Vec<S> = match &self.bindings[id.0] {
                VarBinding::Fixed(v) => {
                    for val in values.iter_mut() {
                        *val = *val + coeff * *v;
                    }
                    continue;
                }
                VarBinding::Bit(_) => vec![S::zero(), coeff],
                VarBinding::Group(g) => std::iter::once(S::zero())
                    .chain(g.deltas.iter().map(|&d| coeff * d))
                    .collect(),
            };
            let mut next = Vec::with_capacity(values.len() * choices.len());
            for &v in &values {
                for &ch in &choices {
                    next.push(v + ch);
                }
            }
            next.sort_by(|a, b| a.partial_cmp(b).unwrap());
            next.dedup_by(|a, b| (*a - *b).abs() <= S::from_f64_lossy(VALUE_MERGE_TOL));
            if next.len() > SLACK_VALUE_CAP {
                return None;
            }
            values = next;
        }
        Some(values)
    }

    /// Detects `P - c*flag <= 0` with the flag's coefficient covering the
    /// encoding's full range and a zero-based encoding.
    fn match_gate(&self, c: &Constraint<S>) -> Option<(Vec<usize>, usize)> {
        if c.relation != Relation::Le || c.rhs != S::zero() || c.expr.constant != S::zero() {
            return None;
        }
        if c.expr.terms.len() != 2 {
            return None;
        }
        let tol = S::from_f64_lossy(1e-9);
        let mut group: Option<(&BitGroup<S>, S)> = None;
        let mut flag: Option<(usize, S)> = None;
        for &(id, coeff) in &c.expr.terms {
            match &self.bindings[id.0] {
                VarBinding::Group(g) if coeff > S::zero() => group = Some((g, coeff)),
                VarBinding::Bit(b) if coeff < S::zero() => flag = Some((*b, coeff)),
                _ => return None,
            }
        }
        let (g, cp) = group?;
        let (flag_bit, cb) = flag?;
        if g.base.abs() > tol {
            return None;
        }
        let max_value = g
            .deltas
            .iter()
            .fold(S::zero(), |acc, &d| acc.max(d.max(S::zero())));
        if -cb + tol < cp * max_value {
            return None;
        }
        Some((g.bits.clone(), flag_bit))
    }

    /// Detects `sum b_i <= n` with unit coefficients on bits, `n` in {0, 1}.
    fn match_count_bound(&self, folded: &BitLinear<S>) -> Option<(usize, Vec<usize>)> {
        let tol = S::from_f64_lossy(1e-9);
        let n = -folded.constant;
        let count = if n.abs() <= tol {
            0
        } else if (n - S::one()).abs() <= tol {
            1
        } else {
            return None;
        };
        let mut bits = Vec::with_capacity(folded.terms.len());
        for &(b, coeff) in &folded.terms {
            if (coeff - S::one()).abs() > tol {
                return None;
            }
            bits.push(b);
        }
        Some((count, bits))
    }
}

fn expand_square<S: Scalar>(q: &mut QuboProblem<S>, lambda: S, lin: &BitLinear<S>) {
    let a0 = lin.constant;
    q.constant_offset = q.constant_offset + lambda * a0 * a0;
    let two = S::from_f64_lossy(2.0);
    for (m, &(bm, am)) in lin.terms.iter().enumerate() {
        q.add(bm, bm, lambda * (two * a0 * am + am * am));
        for &(bn, an) in lin.terms.iter().skip(m + 1) {
            q.add(bm, bn, two * lambda * am * an);
        }
    }
}

/// Translates a model into a QUBO and the bit map needed to get back.
///
/// Every non-fixed continuous variable must carry an encoding; binary
/// variables map to single bits; fixed variables fold into constants.
/// Slack bits, when created, are indexed after all variable bits in
/// constraint order.
pub fn transpile<S: Scalar>(
    model: &StructuredModel<S>,
    config: PenaltyConfig<S>,
    encodings: &EncodingSet<S>,
) -> Result<(QuboProblem<S>, VariableMap<S>)> {
    let feas_tol = S::from_f64_lossy(crate::model::FEASIBILITY_TOLERANCE);
    let mut asm = Assembler {
        config,
        bindings: Vec::with_capacity(model.num_variables()),
        bit_names: Vec::new(),
        next_bit: 0,
    };

    // variable bits, declaration order
    for var in model.variables() {
        let binding = if var.is_fixed() {
            VarBinding::Fixed(var.lower)
        } else {
            match var.kind {
                VarKind::Binary => {
                    let b = asm.alloc_bit(var.name.clone());
                    VarBinding::Bit(b)
                }
                VarKind::Continuous => {
                    let enc = encodings
                        .get(&var.name)
                        .ok_or_else(|| Error::UnencodedVariable(var.name.clone()))?;
                    if enc.offset < var.lower - feas_tol || enc.max_value() > var.upper + feas_tol
                    {
                        return Err(Error::InvalidEncoding(format!(
                            "encoding of `{}` spans [{}, {}] outside bounds [{}, {}]",
                            var.name,
                            enc.offset,
                            enc.max_value(),
                            var.lower,
                            var.upper
                        )));
                    }
                    let mut bits = Vec::with_capacity(enc.num_bits());
                    let mut deltas = Vec::with_capacity(enc.num_bits());
                    for level in 1..enc.levels {
                        bits.push(asm.alloc_bit(format!("{}#k{level}", var.name)));
                        deltas.push(enc.step * S::from_usize_lossy(level));
                    }
                    VarBinding::Group(BitGroup {
                        bits,
                        base: enc.offset,
                        deltas,
                    })
                }
            }
        };
        asm.bindings.push(binding);
    }

    // constraint plans, then slack allocation in constraint order
    enum Plan<S> {
        Skipped,
        ConstantViolation(S),
        Equality,
        Verbatim,
        Gate(Vec<usize>, usize),
        AtMostOne(Vec<usize>),
        ForceZero(Vec<usize>),
        Slack(Vec<S>),
    }

    let mut plans: Vec<Plan<S>> = Vec::with_capacity(model.constraints.len());
    for c in &model.constraints {
        let folded = asm.bitize(&c.expr);
        let residual_const = folded.constant - c.rhs;
        if folded.terms.is_empty() {
            let severity = match c.relation {
                Relation::Eq => residual_const.abs(),
                Relation::Le => residual_const.max(S::zero()),
                Relation::Ge => (-residual_const).max(S::zero()),
            };
            plans.push(if severity <= feas_tol {
                Plan::Skipped
            } else {
                Plan::ConstantViolation(severity)
            });
            continue;
        }
        let plan = match c.relation {
            Relation::Eq => Plan::Equality,
            Relation::Le | Relation::Ge => {
                if let Some((power_bits, flag_bit)) = asm.match_gate(c) {
                    Plan::Gate(power_bits, flag_bit)
                } else if asm.config.inequality_mode == InequalityMode::PaperVerbatim {
                    Plan::Verbatim
                } else {
                    let count_bound = if c.relation == Relation::Le {
                        let mut shifted = folded.clone();
                        shifted.constant = residual_const;
                        asm.match_count_bound(&shifted)
                    } else {
                        None
                    };
                    match count_bound {
                        Some((0, bits)) => Plan::ForceZero(bits),
                        Some((1, bits)) => Plan::AtMostOne(bits),
                        _ => {
                            let residuals =
                                asm.achievable_residuals(c).unwrap_or_else(|| {
                                    uniform_fallback_residuals(c, &asm)
                                });
                            // a constraint no reachable state can violate
                            // needs no penalty and no slack bits
                            let vacuous = residuals.iter().all(|&r| match c.relation {
                                Relation::Le => r <= feas_tol,
                                _ => r >= -feas_tol,
                            });
                            if vacuous {
                                plans.push(Plan::Skipped);
                                continue;
                            }
                            let keep = |r: S| match c.relation {
                                Relation::Le => {
                                    if r <= feas_tol {
                                        Some(-r)
                                    } else {
                                        None
                                    }
                                }
                                _ => {
                                    if r >= -feas_tol {
                                        Some(r)
                                    } else {
                                        None
                                    }
                                }
                            };
                            let mut slack_values: Vec<S> = residuals
                                .into_iter()
                                .filter_map(keep)
                                .filter(|&w| w > feas_tol)
                                .collect();
                            slack_values.sort_by(|a, b| a.partial_cmp(b).unwrap());
                            slack_values.dedup_by(|a, b| {
                                (*a - *b).abs() <= S::from_f64_lossy(VALUE_MERGE_TOL)
                            });
                            Plan::Slack(slack_values)
                        }
                    }
                }
            }
        };
        plans.push(plan);
    }

    // slack bit allocation
    let mut slacks: Vec<SlackGroup<S>> = Vec::new();
    let mut slack_of_constraint: Vec<Option<usize>> = vec![None; model.constraints.len()];
    for (ci, plan) in plans.iter().enumerate() {
        if let Plan::Slack(values) = plan {
            let label = &model.constraints[ci].label;
            let mut bits = Vec::with_capacity(values.len());
            for (j, _) in values.iter().enumerate() {
                bits.push(asm.alloc_bit(format!("slack[{label}]#{}", j + 1)));
            }
            slack_of_constraint[ci] = Some(slacks.len());
            slacks.push(SlackGroup {
                constraint_label: label.clone(),
                group: BitGroup {
                    bits,
                    base: S::zero(),
                    deltas: values.clone(),
                },
            });
        }
    }

    // assembly
    let num_bits = asm.next_bit;
    let mut q = QuboProblem::new(num_bits);
    let mut records: Vec<PenaltyRecord<S>> = Vec::with_capacity(model.constraints.len());

    let objective_bits = asm.bitize(&model.objective);
    q.constant_offset = q.constant_offset + objective_bits.constant;
    for &(b, coeff) in &objective_bits.terms {
        q.add(b, b, coeff);
    }

    for (ci, (c, plan)) in model.constraints.iter().zip(&plans).enumerate() {
        let lambda = asm.config.class_weight(c.class);
        let mut residual_bits = asm.bitize(&c.expr);
        residual_bits.constant = residual_bits.constant - c.rhs;
        let kind = match plan {
            Plan::Skipped => {
                residual_bits = BitLinear::new();
                PenaltyKind::Skipped
            }
            Plan::ConstantViolation(severity) => {
                q.constant_offset = q.constant_offset + lambda * *severity * *severity;
                residual_bits = BitLinear {
                    constant: *severity,
                    terms: Vec::new(),
                };
                PenaltyKind::ConstantViolation
            }
            Plan::Equality => {
                expand_square(&mut q, lambda, &residual_bits);
                PenaltyKind::Equality
            }
            Plan::Verbatim => {
                expand_square(&mut q, lambda, &residual_bits);
                PenaltyKind::Verbatim
            }
            Plan::Gate(power_bits, flag_bit) => {
                for &b in power_bits {
                    q.add(b, b, lambda);
                    q.add(b, *flag_bit, -lambda);
                }
                residual_bits = BitLinear::new();
                PenaltyKind::Gate {
                    power_bits: power_bits.clone(),
                    flag_bit: *flag_bit,
                }
            }
            Plan::AtMostOne(bits) => {
                for (m, &bm) in bits.iter().enumerate() {
                    for &bn in bits.iter().skip(m + 1) {
                        q.add(bm, bn, lambda);
                    }
                }
                residual_bits = BitLinear::new();
                PenaltyKind::AtMostOne { bits: bits.clone() }
            }
            Plan::ForceZero(bits) => {
                for &b in bits {
                    q.add(b, b, lambda);
                }
                residual_bits = BitLinear::new();
                PenaltyKind::ForceZero { bits: bits.clone() }
            }
            Plan::Slack(_) => {
                let si = slack_of_constraint[ci].expect("slack allocated");
                let slack = &slacks[si].group;
                let sign = if c.relation == Relation::Le {
                    S::one()
                } else {
                    -S::one()
                };
                for (&b, &w) in slack.bits.iter().zip(&slack.deltas) {
                    residual_bits.terms.push((b, sign * w));
                }
                expand_square(&mut q, lambda, &residual_bits);
                PenaltyKind::SlackInequality { slack_index: si }
            }
        };
        records.push(PenaltyRecord {
            label: c.label.clone(),
            class: c.class,
            lambda,
            kind,
            residual_bits,
        });
    }

    // one-hot validity for encoded variables and slacks
    let mut one_hot_groups = Vec::new();
    for (var, binding) in model.variables().iter().zip(&asm.bindings) {
        if let VarBinding::Group(g) = binding {
            one_hot_groups.push(OneHotGroup {
                owner: var.name.clone(),
                bits: g.bits.clone(),
            });
        }
    }
    for slack in &slacks {
        one_hot_groups.push(OneHotGroup {
            owner: format!("slack[{}]", slack.constraint_label),
            bits: slack.group.bits.clone(),
        });
    }
    for g in &one_hot_groups {
        for (m, &bm) in g.bits.iter().enumerate() {
            for &bn in g.bits.iter().skip(m + 1) {
                q.add(bm, bn, asm.config.one_hot);
            }
        }
    }

    // bilinear exclusions
    let tol = feas_tol;
    let mut exclusion_records = Vec::new();
    for &(ia, ib) in &model.bilinear_exclusions {
        let side = |binding: &VarBinding<S>| -> std::result::Result<Vec<usize>, bool> {
            match binding {
                VarBinding::Fixed(v) => Err(v.abs() > tol),
                VarBinding::Bit(b) => Ok(vec![*b]),
                VarBinding::Group(g) => {
                    if g.base.abs() > tol {
                        Err(true)
                    } else {
                        Ok(g.bits.clone())
                    }
                }
            }
        };
        let a = side(&asm.bindings[ia.0]);
        let b = side(&asm.bindings[ib.0]);
        let bits = match (a, b) {
            (Err(false), _) | (_, Err(false)) => ExclusionBits::Constant(false),
            (Err(true), Err(true)) => {
                q.constant_offset = q.constant_offset + asm.config.exclusion;
                ExclusionBits::Constant(true)
            }
            (Err(true), Ok(bits)) | (Ok(bits), Err(true)) => {
                for &bb in &bits {
                    q.add(bb, bb, asm.config.exclusion);
                }
                ExclusionBits::LinearOn(bits)
            }
            (Ok(ba), Ok(bb)) => {
                for &x in &ba {
                    for &y in &bb {
                        q.add(x, y, asm.config.exclusion);
                    }
                }
                ExclusionBits::Pairs(ba, bb)
            }
        };
        exclusion_records.push(ExclusionRecord {
            a: model.variable(ia).name.clone(),
            b: model.variable(ib).name.clone(),
            bits,
        });
    }

    q.prune_zeros();

    let map = VariableMap {
        names: model.variables().iter().map(|v| v.name.clone()).collect(),
        by_name: model
            .variables()
            .iter()
            .enumerate()
            .map(|(i, v)| (v.name.clone(), i))
            .collect(),
        bindings: asm.bindings,
        num_bits,
        bit_names: asm.bit_names,
        slacks,
        one_hot_groups,
        penalties: records,
        exclusions: exclusion_records,
        objective_bits,
        lambda_one_hot: config.one_hot,
        lambda_exclusion: config.exclusion,
    };
    Ok((q, map))
}

/// Uniform-grid slack values used when the achievable-residual set is too
/// large to enumerate. May leave some feasible interior points penalized;
/// sized at `SLACK_FALLBACK_BITS` levels over the constraint's range.
fn uniform_fallback_residuals<S: Scalar>(c: &Constraint<S>, asm: &Assembler<S>) -> Vec<S> {
    let mut lo = c.expr.constant - c.rhs;
    let mut hi = lo;
    for &(id, coeff) in &c.expr.terms {
        let (min_c, max_c) = match &asm.bindings[id.0] {
            VarBinding::Fixed(v) => (coeff * *v, coeff * *v),
            VarBinding::Bit(_) => (coeff.min(S::zero()), coeff.max(S::zero())),
            VarBinding::Group(g) => {
                let mut mn = S::zero();
                let mut mx = S::zero();
                for &d in &g.deltas {
                    mn = mn.min(coeff * d);
                    mx = mx.max(coeff * d);
                }
                (mn, mx)
            }
        };
        lo = lo + min_c;
        hi = hi + max_c;
    }
    let n = S::from_usize_lossy(SLACK_FALLBACK_BITS);
    let step = (hi - lo) / n;
    (0..=SLACK_FALLBACK_BITS)
        .map(|k| lo + step * S::from_usize_lossy(k))
        .collect()
}

// ---------------------------------------------------------------------------
// decode
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DecodedAssignment<S> {
    pub assignment: Assignment<S>,
    /// Variables whose one-hot group had more than one set bit; their
    /// value took the lowest set level.
    pub multi_hot: Vec<String>,
}

/// Maps a bitstring back to a model assignment. Slack bits are dropped;
/// multi-hot groups decode to their lowest set level and are flagged.
pub fn decode<S: Scalar>(bits: &[bool], map: &VariableMap<S>) -> Result<DecodedAssignment<S>> {
    if bits.len() != map.num_bits {
        return Err(Error::BitLength {
            got: bits.len(),
            expected: map.num_bits,
        });
    }
    let mut assignment = Assignment::new();
    let mut multi_hot = Vec::new();
    for (i, binding) in map.bindings.iter().enumerate() {
        let value = match binding {
            VarBinding::Fixed(v) => *v,
            VarBinding::Bit(b) => {
                if bits[*b] {
                    S::one()
                } else {
                    S::zero()
                }
            }
            VarBinding::Group(g) => {
                if g.set_count(bits) > 1 {
                    multi_hot.push(map.names[i].clone());
                }
                g.decoded_value(bits)
            }
        };
        assignment.set(map.names[i].clone(), value);
    }
    Ok(DecodedAssignment {
        assignment,
        multi_hot,
    })
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct PenaltyAuditEntry<S> {
    pub label: String,
    pub class: ConstraintClass,
    /// This constraint's contribution to the QUBO energy.
    pub penalty: S,
    /// Whether the decoded assignment satisfies the original constraint.
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct PenaltyAudit<S> {
    pub constraints: Vec<PenaltyAuditEntry<S>>,
    /// One-hot validity penalties, keyed by the owning variable or slack.
    pub one_hot: Vec<(String, S)>,
    /// Exclusion-pair penalties.
    pub exclusions: Vec<(String, String, S)>,
    /// Objective evaluated at the substituted (encoded) values — equals
    /// the decoded objective whenever the bitstring is one-hot valid.
    pub raw_objective: S,
    pub total_penalty: S,
}

impl<S: Scalar> PenaltyAudit<S> {
    /// `energy - raw_objective - total_penalty`; zero up to float noise.
    pub fn identity_gap(&self, energy: S) -> S {
        energy - self.raw_objective - self.total_penalty
    }
}

/// Recomputes every penalty contribution for `bits` and checks each
/// original constraint against the decoded assignment.
pub fn penalty_audit<S: Scalar>(
    model: &StructuredModel<S>,
    map: &VariableMap<S>,
    bits: &[bool],
) -> Result<PenaltyAudit<S>> {
    let decoded = decode(bits, map)?;
    let values = model.dense_values(&decoded.assignment)?;
    let feas_tol = S::from_f64_lossy(crate::model::FEASIBILITY_TOLERANCE);

    let mut total = S::zero();
    let mut constraints = Vec::with_capacity(map.penalties.len());
    for (record, c) in map.penalties.iter().zip(&model.constraints) {
        let penalty = match &record.kind {
            PenaltyKind::Skipped => S::zero(),
            PenaltyKind::ConstantViolation
            | PenaltyKind::Equality
            | PenaltyKind::Verbatim
            | PenaltyKind::SlackInequality { .. } => {
                let r = record.residual_bits.eval(bits);
                record.lambda * r * r
            }
            PenaltyKind::Gate {
                power_bits,
                flag_bit,
            } => {
                if bits[*flag_bit] {
                    S::zero()
                } else {
                    let set = power_bits.iter().filter(|&&b| bits[b]).count();
                    record.lambda * S::from_usize_lossy(set)
                }
            }
            PenaltyKind::AtMostOne { bits: group } => {
                let set = group.iter().filter(|&&b| bits[b]).count();
                record.lambda * S::from_usize_lossy(set.saturating_sub(1) * set / 2)
            }
            PenaltyKind::ForceZero { bits: group } => {
                let set = group.iter().filter(|&&b| bits[b]).count();
                record.lambda * S::from_usize_lossy(set)
            }
        };
        total = total + penalty;
        let residual = c.residual(&values);
        constraints.push(PenaltyAuditEntry {
            label: record.label.clone(),
            class: record.class,
            penalty,
            satisfied: c.satisfied(residual, feas_tol),
        });
    }

    let mut one_hot = Vec::new();
    for g in &map.one_hot_groups {
        let set = g.bits.iter().filter(|&&b| bits[b]).count();
        let pairs = set.saturating_sub(1) * set / 2;
        let penalty = map.lambda_one_hot * S::from_usize_lossy(pairs);
        total = total + penalty;
        one_hot.push((g.owner.clone(), penalty));
    }

    let mut exclusions = Vec::new();
    for record in &map.exclusions {
        let penalty = match &record.bits {
            ExclusionBits::Constant(false) => S::zero(),
            ExclusionBits::Constant(true) => map.lambda_exclusion,
            ExclusionBits::LinearOn(bs) => {
                let set = bs.iter().filter(|&&b| bits[b]).count();
                map.lambda_exclusion * S::from_usize_lossy(set)
            }
            ExclusionBits::Pairs(ba, bb) => {
                let mut products = 0usize;
                for &x in ba {
                    if bits[x] {
                        products += bb.iter().filter(|&&y| bits[y]).count();
                    }
                }
                map.lambda_exclusion * S::from_usize_lossy(products)
            }
        };
        total = total + penalty;
        exclusions.push((record.a.clone(), record.b.clone(), penalty));
    }

    Ok(PenaltyAudit {
        constraints,
        one_hot,
        exclusions,
        raw_objective: map.objective_bits.eval(bits),
        total_penalty: total,
    })
}
