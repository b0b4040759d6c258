//! Hybrid discrete/continuous decomposition.
//!
//! The model splits into routing/placement binaries (presence and
//! traversal indicators) and gated continuous dispatch: the binary part
//! is explored by Metropolis annealing over a penalty-only QUBO of the
//! binary constraints, and for each candidate configuration the
//! continuous part is recovered classically — per vehicle, a forward
//! dynamic program over encoded power levels that propagates
//! state-of-charge feasibility timestep by timestep. Charge/discharge
//! on-off indicators follow from the recovered power levels. The final
//! assignment is feasibility-checked with [`crate::model::evaluate`].

use std::collections::HashMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    evaluate, Assignment, ConstraintClass, LinExpr, ObjectiveReport, Relation, StructuredModel,
    VarId, VarKind, VarRole,
};
use crate::qubo::{
    transpile, EncodingSet, InequalityMode, OneHotEncoding, PenaltyConfig, QuboProblem,
};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
pub struct HybridConfig {
    pub seed: u64,
    /// Sweeps of the outer binary-configuration annealer.
    pub sweeps: usize,
    pub restarts: usize,
    /// Coordinate passes of the final continuous recovery.
    pub max_passes: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            sweeps: 150,
            restarts: 4,
            max_passes: 8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct HybridSolution<S> {
    pub assignment: Assignment<S>,
    pub objective: S,
    pub feasible: bool,
    pub report: ObjectiveReport<S>,
    pub wall_time: std::time::Duration,
}

/// One battery-dynamics link `soc_next = f(soc_prev, step powers)`.
struct ChainStep<S> {
    next_soc: usize,
    next_coeff: S,
    /// Every non-`next` term of the dynamics equality.
    others: Vec<(usize, S)>,
    constant: S,
    /// Power variables selectable at this step.
    powers: Vec<usize>,
}

/// A vehicle: the fixed initial state of charge plus its dynamics chain.
struct Chain<S> {
    root_soc: usize,
    steps: Vec<ChainStep<S>>,
}

struct Analysis<S: Scalar> {
    chains: Vec<Chain<S>>,
    /// Gating binaries per power variable, split by role.
    presence_gates: Vec<Vec<usize>>,
    onoff_gates: Vec<Vec<usize>>,
    /// Coupled `<=`/`>=` constraints (per-step limits) per power variable.
    coupled: Vec<Vec<usize>>,
    /// Binary variables explored by the annealer.
    annealed: Vec<usize>,
    /// Candidate levels per power variable (nonzero encoded values).
    power_levels: Vec<Vec<S>>,
    /// Allowed state-of-charge values per soc variable.
    soc_grid: Vec<Vec<S>>,
    obj_coeff: Vec<S>,
}

fn analyze<S: Scalar>(
    model: &StructuredModel<S>,
    encodings: &EncodingSet<S>,
) -> Result<Analysis<S>> {
    let n = model.num_variables();
    let first_constraint_with = |id: usize| -> String {
        model
            .constraints
            .iter()
            .find(|c| c.expr.terms.iter().any(|&(v, _)| v.0 == id))
            .map(|c| c.label.clone())
            .unwrap_or_else(|| "<no constraint>".to_string())
    };

    // separability: every non-fixed continuous variable must be a gated
    // power or a derived state of charge
    for (i, var) in model.variables().iter().enumerate() {
        if var.kind == VarKind::Continuous && !var.is_fixed() {
            match var.role {
                VarRole::Charge | VarRole::Discharge | VarRole::Soc => {}
                _ => {
                    return Err(Error::NonSeparable(format!(
                        "continuous variable `{}` is neither a gated power nor a \
                         state of charge (see constraint `{}`)",
                        var.name,
                        first_constraint_with(i)
                    )));
                }
            }
        }
    }

    let mut presence_gates = vec![Vec::new(); n];
    let mut onoff_gates = vec![Vec::new(); n];
    let mut coupled = vec![Vec::new(); n];
    let is_power = |id: usize| {
        let v = &model.variables()[id];
        matches!(v.role, VarRole::Charge | VarRole::Discharge) && !v.is_fixed()
    };

    for (ci, c) in model.constraints.iter().enumerate() {
        match c.class {
            ConstraintClass::ChargeGate | ConstraintClass::DischargeGate => {
                let mut power = None;
                let mut flag = None;
                for &(id, coeff) in &c.expr.terms {
                    if coeff > S::zero() && is_power(id.0) {
                        power = Some(id.0);
                    } else if coeff < S::zero()
                        && model.variables()[id.0].kind == VarKind::Binary
                    {
                        flag = Some(id.0);
                    }
                }
                if let (Some(p), Some(f)) = (power, flag) {
                    match model.variables()[f].role {
                        VarRole::OnOff => onoff_gates[p].push(f),
                        _ => presence_gates[p].push(f),
                    }
                }
            }
            ConstraintClass::SocDynamics => {}
            _ => {
                for &(id, _) in &c.expr.terms {
                    if is_power(id.0) {
                        coupled[id.0].push(ci);
                    }
                }
            }
        }
    }

    // dynamics chains, rooted at fixed state-of-charge variables
    let mut soc_constraints: HashMap<usize, Vec<usize>> = HashMap::new();
    for (ci, c) in model.constraints.iter().enumerate() {
        if c.class != ConstraintClass::SocDynamics {
            continue;
        }
        for &(id, _) in &c.expr.terms {
            if model.variables()[id.0].role == VarRole::Soc {
                soc_constraints.entry(id.0).or_default().push(ci);
            }
        }
    }
    let mut chains = Vec::new();
    let mut used = vec![false; model.constraints.len()];
    for (i, var) in model.variables().iter().enumerate() {
        if var.role != VarRole::Soc || !var.is_fixed() {
            continue;
        }
        let mut steps = Vec::new();
        let mut current = i;
        loop {
            let Some(cis) = soc_constraints.get(&current) else {
                break;
            };
            let Some(&ci) = cis.iter().find(|&&ci| !used[ci]) else {
                break;
            };
            used[ci] = true;
            let c = &model.constraints[ci];
            let mut next = None;
            let mut others = Vec::new();
            let mut powers = Vec::new();
            for &(id, coeff) in &c.expr.terms {
                if model.variables()[id.0].role == VarRole::Soc && id.0 != current && next.is_none()
                {
                    next = Some((id.0, coeff));
                } else {
                    others.push((id.0, coeff));
                    if is_power(id.0) {
                        powers.push(id.0);
                    }
                }
            }
            let Some((next_soc, next_coeff)) = next else {
                break;
            };
            steps.push(ChainStep {
                next_soc,
                next_coeff,
                others,
                constant: c.expr.constant - c.rhs,
                powers,
            });
            current = next_soc;
        }
        if !steps.is_empty() {
            chains.push(Chain { root_soc: i, steps });
        }
    }

    // unbound state-of-charge variables indicate structure we cannot recover
    for (i, var) in model.variables().iter().enumerate() {
        if var.role == VarRole::Soc && !var.is_fixed() && !soc_constraints.contains_key(&i) {
            return Err(Error::NonSeparable(format!(
                "state-of-charge variable `{}` has no dynamics equality",
                var.name
            )));
        }
    }

    let mut annealed = Vec::new();
    for (i, var) in model.variables().iter().enumerate() {
        if var.kind == VarKind::Binary && !var.is_fixed() && var.role != VarRole::OnOff {
            annealed.push(i);
        }
    }

    let mut power_levels = vec![Vec::new(); n];
    let mut soc_grid = vec![Vec::new(); n];
    for (i, var) in model.variables().iter().enumerate() {
        if var.kind != VarKind::Continuous || var.is_fixed() {
            if var.is_fixed() && var.role == VarRole::Soc {
                soc_grid[i] = vec![var.lower];
            }
            continue;
        }
        let enc: &OneHotEncoding<S> = encodings
            .get(&var.name)
            .ok_or_else(|| Error::UnencodedVariable(var.name.clone()))?;
        match var.role {
            VarRole::Soc => soc_grid[i] = enc.values().collect(),
            _ => power_levels[i] = enc.values().skip(1).collect(),
        }
    }

    let mut obj_coeff = vec![S::zero(); n];
    for &(id, coeff) in &model.objective.terms {
        obj_coeff[id.0] = obj_coeff[id.0] + coeff;
    }

    Ok(Analysis {
        chains,
        presence_gates,
        onoff_gates,
        coupled,
        annealed,
        power_levels,
        soc_grid,
        obj_coeff,
    })
}

/// Penalty-only QUBO over the annealed binaries: every constraint whose
/// support is binary-only, plus the binary exclusion pairs.
fn binary_penalty_qubo<S: Scalar>(
    model: &StructuredModel<S>,
    analysis: &Analysis<S>,
    lambda: S,
) -> Result<QuboProblem<S>> {
    let mut sub = StructuredModel::new("hybrid_binary");
    let mut sub_ids: HashMap<usize, VarId> = HashMap::new();
    for &i in &analysis.annealed {
        let var = &model.variables()[i];
        let id = sub.add_binary(var.name.clone(), var.role)?;
        sub_ids.insert(i, id);
    }
    for c in &model.constraints {
        let mut expr = LinExpr::new();
        expr.constant = c.expr.constant;
        let mut ok = true;
        for &(id, coeff) in &c.expr.terms {
            let var = &model.variables()[id.0];
            if var.is_fixed() {
                expr.add_constant(coeff * var.lower);
            } else if let Some(&sub_id) = sub_ids.get(&id.0) {
                expr.push(sub_id, coeff);
            } else {
                ok = false;
                break;
            }
        }
        if ok && !expr.terms.is_empty() {
            sub.add_constraint(c.label.clone(), expr, c.relation, c.rhs, c.class);
        }
    }
    for &(a, b) in &model.bilinear_exclusions {
        if let (Some(&sa), Some(&sb)) = (sub_ids.get(&a.0), sub_ids.get(&b.0)) {
            sub.add_exclusion(sa, sb);
        }
    }
    let config = PenaltyConfig::uniform(lambda, InequalityMode::SlackBits);
    let (q, _) = transpile(&sub, config, &EncodingSet::new())?;
    Ok(q)
}

/// Recovers the continuous dispatch for fixed binaries: one forward DP
/// per vehicle over (timestep, state-of-charge level), coordinate passes
/// across vehicles until no pass improves the objective.
struct Recovery<'a, S: Scalar> {
    model: &'a StructuredModel<S>,
    analysis: &'a Analysis<S>,
    tol: S,
}

impl<S: Scalar> Recovery<'_, S> {
    /// Baseline values: fixed at bounds, annealed binaries from `config`,
    /// everything else zero, soc propagated with zero power.
    fn baseline(&self, config: &[bool]) -> Vec<S> {
        let mut values = vec![S::zero(); self.model.num_variables()];
        for (i, var) in self.model.variables().iter().enumerate() {
            if var.is_fixed() {
                values[i] = var.lower;
            }
        }
        for (slot, &i) in self.analysis.annealed.iter().enumerate() {
            values[i] = if config[slot] { S::one() } else { S::zero() };
        }
        for chain in &self.analysis.chains {
            for step in &chain.steps {
                // zero powers: next = -(constant + others·values)/coeff
                let mut acc = step.constant;
                for &(id, coeff) in &step.others {
                    acc = acc + coeff * values[id];
                }
                values[step.next_soc] = -acc / step.next_coeff;
            }
        }
        values
    }

    /// Dynamic program for one vehicle given everyone else's `values`.
    /// The vehicle's own powers must already be zeroed.
    fn optimize_chain(&self, chain: &Chain<S>, values: &mut [S]) {
        #[derive(Clone)]
        struct Node<S> {
            soc: S,
            cost: S,
            parent: usize,
            choice: Option<(usize, S)>,
        }
        let mut layers: Vec<Vec<Node<S>>> = Vec::with_capacity(chain.steps.len() + 1);
        layers.push(vec![Node {
            soc: values[chain.root_soc],
            cost: S::zero(),
            parent: usize::MAX,
            choice: None,
        }]);

        for step in &chain.steps {
            let mut next: Vec<Node<S>> = Vec::new();
            let allowed = &self.analysis.soc_grid[step.next_soc];
            for (pi, parent) in layers.last().unwrap().iter().enumerate() {
                // choice: idle, or exactly one power variable at one level
                let mut try_choice = |choice: Option<(usize, S)>, cost: S| {
                    let mut acc = step.constant;
                    for &(id, coeff) in &step.others {
                        let v = match choice {
                            Some((cid, cv)) if cid == id => cv,
                            _ if self.model.variables()[id].role == VarRole::Soc => parent.soc,
                            _ => values[id],
                        };
                        acc = acc + coeff * v;
                    }
                    let soc_next = -acc / step.next_coeff;
                    if !allowed
                        .iter()
                        .any(|&g| (g - soc_next).abs() <= self.tol)
                    {
                        return;
                    }
                    let total = parent.cost + cost;
                    match next
                        .iter_mut()
                        .find(|n| (n.soc - soc_next).abs() <= self.tol)
                    {
                        Some(node) => {
                            if total < node.cost {
                                node.cost = total;
                                node.parent = pi;
                                node.choice = choice;
                                node.soc = soc_next;
                            }
                        }
                        None => next.push(Node {
                            soc: soc_next,
                            cost: total,
                            parent: pi,
                            choice,
                        }),
                    }
                };

                try_choice(None, S::zero());
                for &p in &step.powers {
                    if !self.power_allowed(p, values) {
                        continue;
                    }
                    for &level in &self.analysis.power_levels[p] {
                        if !self.level_fits(p, level, values) {
                            continue;
                        }
                        try_choice(Some((p, level)), self.analysis.obj_coeff[p] * level);
                    }
                }
            }
            if next.is_empty() {
                return; // no feasible continuation; leave the vehicle idle
            }
            layers.push(next);
        }

        // minimal terminal state, then backtrack
        let last = layers.last().unwrap();
        let mut best = 0;
        for (i, node) in last.iter().enumerate() {
            if node.cost < last[best].cost {
                best = i;
            }
        }
        let mut idx = best;
        for (li, step) in chain.steps.iter().enumerate().rev() {
            let node = &layers[li + 1][idx];
            values[step.next_soc] = node.soc;
            if let Some((p, level)) = node.choice {
                values[p] = level;
                for &f in &self.analysis.onoff_gates[p] {
                    values[f] = S::one();
                }
            }
            idx = node.parent;
        }
    }

    /// Presence/traversal gates of `p` must all be on in the binary config.
    fn power_allowed(&self, p: usize, values: &[S]) -> bool {
        self.analysis.presence_gates[p]
            .iter()
            .all(|&g| values[g] > S::from_f64_lossy(0.5))
    }

    /// `level` on `p` must not overshoot any coupled one-sided limit,
    /// given everyone else's current values.
    fn level_fits(&self, p: usize, level: S, values: &[S]) -> bool {
        for &ci in &self.analysis.coupled[p] {
            let c = &self.model.constraints[ci];
            if c.relation != Relation::Le {
                continue;
            }
            let mut lhs = c.expr.constant;
            let mut coeff_p = S::zero();
            for &(id, coeff) in &c.expr.terms {
                if id.0 == p {
                    coeff_p = coeff;
                } else {
                    lhs = lhs + coeff * values[id.0];
                }
            }
            if lhs + coeff_p * level > c.rhs + self.tol {
                return false;
            }
        }
        true
    }

    fn recover(&self, config: &[bool], passes: usize) -> Vec<S> {
        let mut values = self.baseline(config);
        let mut last_objective = self.model.objective.value(&values);
        for _ in 0..passes.max(1) {
            for chain in &self.analysis.chains {
                // clear the vehicle before re-optimizing it
                for step in &chain.steps {
                    for &p in &step.powers {
                        values[p] = S::zero();
                        for &f in &self.analysis.onoff_gates[p] {
                            values[f] = S::zero();
                        }
                    }
                }
                self.optimize_chain(chain, &mut values);
            }
            let objective = self.model.objective.value(&values);
            if objective >= last_objective - self.tol {
                break;
            }
            last_objective = objective;
        }
        values
    }
}

/// Solves by annealing the binary configuration while recovering the
/// gated continuous dispatch classically for every candidate. Refuses
/// models whose continuous part is not separable into gated powers and
/// chained state of charge.
pub fn hybrid_solve<S: Scalar>(
    model: &StructuredModel<S>,
    encodings: &EncodingSet<S>,
    config: &HybridConfig,
) -> Result<HybridSolution<S>> {
    let start = Instant::now();
    let analysis = analyze(model, encodings)?;
    let tol = S::from_f64_lossy(crate::model::FEASIBILITY_TOLERANCE);
    let recovery = Recovery {
        model,
        analysis: &analysis,
        tol,
    };

    let span = crate::qubo::transpile::objective_abs_bound(model, encodings)?;
    let lambda = S::one() + span + span;
    let penalty_q = binary_penalty_qubo(model, &analysis, lambda)?;
    let nb = analysis.annealed.len();

    // outer energy: recovered objective plus binary-constraint penalties
    let energy_of = |bits: &[bool]| -> Result<(S, Vec<S>)> {
        let values = recovery.recover(bits, 1);
        let binary_bits: Vec<bool> = bits.to_vec();
        let mut padded = binary_bits;
        padded.resize(penalty_q.num_bits(), false);
        // slack completion: greedy descent over slack bits only would be
        // exact; rely on the penalty floor instead and treat any positive
        // penalty as a soft rejection during search
        let penalty = best_penalty(&penalty_q, &padded, nb)?;
        Ok((model.objective.value(&values) + penalty, values))
    };

    let mut best_bits = vec![false; nb];
    let (mut best_energy, mut best_values) = energy_of(&best_bits)?;

    if nb > 0 {
        let t0 = (S::one() + span).to_f64_lossy();
        let tf = t0 * 1e-3;
        for restart in 0..config.restarts.max(1) {
            let mut rng = ChaCha8Rng::seed_from_u64(
                config
                    .seed
                    .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(restart as u64)),
            );
            let mut bits: Vec<bool> = if restart == 0 {
                vec![false; nb]
            } else {
                (0..nb).map(|_| rng.random::<bool>()).collect()
            };
            let (mut energy, start_values) = energy_of(&bits)?;
            if energy < best_energy {
                best_energy = energy;
                best_bits = bits.clone();
                best_values = start_values;
            }
            for sweep in 0..config.sweeps.max(1) {
                let frac = if config.sweeps > 1 {
                    sweep as f64 / (config.sweeps - 1) as f64
                } else {
                    1.0
                };
                let temp = t0 * (tf / t0).powf(frac);
                for bit in 0..nb {
                    bits[bit] = !bits[bit];
                    let (cand_energy, cand_values) = energy_of(&bits)?;
                    let delta = (cand_energy - energy).to_f64_lossy();
                    let accept = delta <= 0.0 || rng.random::<f64>() < (-delta / temp).exp();
                    if accept {
                        energy = cand_energy;
                        if energy < best_energy {
                            best_energy = energy;
                            best_bits = bits.clone();
                            best_values = cand_values;
                        }
                    } else {
                        bits[bit] = !bits[bit];
                    }
                }
            }
        }
    }

    // full coordinate recovery on the winning configuration
    let final_values = recovery.recover(&best_bits, config.max_passes);
    let final_obj = model.objective.value(&final_values);
    let chosen = if final_obj <= best_energy + tol {
        final_values
    } else {
        best_values
    };

    let mut assignment = Assignment::new();
    for (var, &value) in model.variables().iter().zip(&chosen) {
        assignment.set(var.name.clone(), value);
    }
    let report = evaluate(model, &assignment)?;
    Ok(HybridSolution {
        objective: report.objective,
        feasible: report.feasible,
        assignment,
        report,
        wall_time: start.elapsed(),
    })
}

/// Minimum penalty energy over slack-bit completions of a fixed binary
/// prefix. Slack groups are small; a greedy per-group scan is exact
/// because slack bits of different groups never couple.
fn best_penalty<S: Scalar>(
    q: &QuboProblem<S>,
    padded: &[bool],
    fixed_prefix: usize,
) -> Result<S> {
    let mut bits = padded.to_vec();
    let (diag, neighbors) = q.adjacency();
    // descend over slack bits only, steepest first
    loop {
        let mut best: Option<(usize, S)> = None;
        for bit in fixed_prefix..bits.len() {
            let delta = q.flip_delta(&bits, bit, &diag, &neighbors);
            if delta < S::zero() && best.map_or(true, |(_, d)| delta < d) {
                best = Some((bit, delta));
            }
        }
        match best {
            Some((bit, _)) => bits[bit] = !bits[bit],
            None => break,
        }
    }
    q.energy(&bits)
}
