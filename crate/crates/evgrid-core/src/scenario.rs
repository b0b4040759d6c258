//! Weighted uncertainty scenarios and stochastic model assembly.
//!
//! A [`Scenario`] stores sparse overrides against a base instance:
//! critical loads, generation, demand, edge travel times (with outages
//! rendering a pair unreachable), and vehicle availability. The
//! stochastic builders materialize one model copy per scenario, prefix
//! its variables with `w{idx}:`, scale its objective by the scenario
//! probability, and sum — so the stochastic objective of any assignment
//! is exactly the probability-weighted sum of per-scenario objectives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::csp::CSPInstance;
use crate::error::{Error, Result};
use crate::model::{Assignment, LinExpr, StructuredModel, VarRole};
use crate::scalar::Scalar;
use crate::v2g::{build_weighted_model, ObjectiveMode, V2GInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOverrides<S> {
    /// `(timestep, location index, new value)` replacements.
    #[serde(default = "Vec::new")]
    pub crit_kw: Vec<(usize, usize, S)>,
    #[serde(default = "Vec::new")]
    pub gen_kw: Vec<(usize, usize, S)>,
    /// `(timestep, new value)` replacements.
    #[serde(default = "Vec::new")]
    pub demand_kw: Vec<(usize, S)>,
    /// `(edge index, new travel time)`; `None` is an outage — the edge
    /// disappears and the pair may become unreachable.
    #[serde(default = "Vec::new")]
    pub edge_travel_time: Vec<(usize, Option<u32>)>,
    /// `(vehicle index, available)`; unavailable vehicles leave the
    /// fleet for that scenario.
    #[serde(default = "Vec::new")]
    pub vehicle_available: Vec<(usize, bool)>,
}

impl<S> ScenarioOverrides<S> {
    pub fn is_empty(&self) -> bool {
        self.crit_kw.is_empty()
            && self.gen_kw.is_empty()
            && self.demand_kw.is_empty()
            && self.edge_travel_time.is_empty()
            && self.vehicle_available.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario<S> {
    pub id: String,
    pub probability: S,
    #[serde(default = "empty_overrides")]
    pub overrides: ScenarioOverrides<S>,
}

fn empty_overrides<S>() -> ScenarioOverrides<S> {
    ScenarioOverrides {
        crit_kw: Vec::new(),
        gen_kw: Vec::new(),
        demand_kw: Vec::new(),
        edge_travel_time: Vec::new(),
        vehicle_available: Vec::new(),
    }
}

impl<S> Default for ScenarioOverrides<S> {
    fn default() -> Self {
        empty_overrides()
    }
}

/// Scenarios with bi-objective weights. Probabilities must sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet<S> {
    scenarios: Vec<Scenario<S>>,
    pub w1: S,
    pub w2: S,
}

impl<S: Scalar> ScenarioSet<S> {
    pub fn new(scenarios: Vec<Scenario<S>>, w1: S, w2: S) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(Error::EmptyScenarioSet);
        }
        let tol = S::from_f64_lossy(1e-9);
        let total = scenarios
            .iter()
            .fold(S::zero(), |acc, s| acc + s.probability);
        if scenarios.iter().any(|s| s.probability < S::zero()) || (total - S::one()).abs() > tol {
            return Err(Error::BadProbabilities {
                sum: total.to_f64_lossy(),
            });
        }
        let in_unit = |w: S| w >= S::zero() && w <= S::one();
        if !(in_unit(w1) && in_unit(w2)) || (w1 + w2 - S::one()).abs() > tol {
            return Err(Error::BadWeights {
                w1: w1.to_f64_lossy(),
                w2: w2.to_f64_lossy(),
            });
        }
        Ok(Self { scenarios, w1, w2 })
    }

    pub fn scenarios(&self) -> &[Scenario<S>] {
        &self.scenarios
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Sampling knobs: multiplicative log-normal-style factors for loads and
/// generation, Bernoulli edge and vehicle outages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub load_sigma: f64,
    pub gen_sigma: f64,
    pub edge_outage_prob: f64,
    pub vehicle_outage_prob: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self {
            load_sigma: 0.2,
            gen_sigma: 0.2,
            edge_outage_prob: 0.1,
            vehicle_outage_prob: 0.05,
        }
    }
}

impl PerturbationConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("load_sigma", self.load_sigma),
            ("gen_sigma", self.gen_sigma),
            ("edge_outage_prob", self.edge_outage_prob),
            ("vehicle_outage_prob", self.vehicle_outage_prob),
        ] {
            if !(0.0..=1.0).contains(&v) && name.contains("prob") || v < 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "perturbation {name} = {v} out of range"
                )));
            }
        }
        Ok(())
    }
}

/// Draws `count` equiprobable scenarios. A pure function of
/// `(base, config, seed, count)`: the same seed reproduces the same set.
pub fn sample_scenarios<S: Scalar>(
    base: &CSPInstance<S>,
    config: &PerturbationConfig,
    seed: u64,
    count: usize,
) -> Result<ScenarioSet<S>> {
    if count == 0 {
        return Err(Error::InvalidInstance("scenario count must be >= 1".into()));
    }
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = base.horizon();
    let num_locations = base.v2g.locations.len();
    let probability = S::one() / S::from_usize_lossy(count);

    let mut scenarios = Vec::with_capacity(count);
    for idx in 0..count {
        let mut overrides = ScenarioOverrides::default();
        for t in 0..horizon {
            for d in 0..num_locations {
                let z: f64 = StandardNormal.sample(&mut rng);
                if config.load_sigma > 0.0 {
                    let factor = (config.load_sigma * z).exp();
                    let v = base.v2g.limits.crit_kw[t][d].to_f64_lossy() * factor;
                    overrides.crit_kw.push((t, d, S::from_f64_lossy(v)));
                }
                let z: f64 = StandardNormal.sample(&mut rng);
                if config.gen_sigma > 0.0 {
                    let factor = (config.gen_sigma * z).exp();
                    let v = (base.v2g.limits.gen_kw[t][d].to_f64_lossy() * factor)
                        .min(base.v2g.limits.gen_max_kw[t][d].to_f64_lossy());
                    overrides.gen_kw.push((t, d, S::from_f64_lossy(v)));
                }
            }
            let z: f64 = StandardNormal.sample(&mut rng);
            if config.load_sigma > 0.0 {
                let factor = (config.load_sigma * z).exp();
                let v = base.v2g.limits.demand_kw[t].to_f64_lossy() * factor;
                overrides.demand_kw.push((t, S::from_f64_lossy(v)));
            }
        }
        for (e, _) in base.graph.edges.iter().enumerate() {
            let roll: f64 = rng.random();
            if config.edge_outage_prob > 0.0 && roll < config.edge_outage_prob {
                overrides.edge_travel_time.push((e, None));
            }
        }
        for (v, _) in base.v2g.fleet.iter().enumerate() {
            let roll: f64 = rng.random();
            if config.vehicle_outage_prob > 0.0 && roll < config.vehicle_outage_prob {
                overrides.vehicle_available.push((v, false));
            }
        }
        scenarios.push(Scenario {
            id: format!("w{idx}"),
            probability,
            overrides,
        });
    }
    ScenarioSet::new(scenarios, S::from_f64_lossy(0.5), S::from_f64_lossy(0.5))
}

/// Materializes a scenario against the dispatch part of an instance.
pub fn apply_to_v2g<S: Scalar>(
    scenario: &Scenario<S>,
    base: &V2GInstance<S>,
) -> Result<V2GInstance<S>> {
    let mut out = base.clone();
    let horizon = base.horizon();
    let num_locations = base.locations.len();
    let bad = |what: &'static str, index: usize| Error::BadScenarioOverride {
        scenario: scenario.id.clone(),
        what,
        index,
    };
    for &(t, d, v) in &scenario.overrides.crit_kw {
        if t >= horizon || d >= num_locations {
            return Err(bad("crit_kw", t.max(d)));
        }
        out.limits.crit_kw[t][d] = v;
    }
    for &(t, d, v) in &scenario.overrides.gen_kw {
        if t >= horizon || d >= num_locations {
            return Err(bad("gen_kw", t.max(d)));
        }
        out.limits.gen_kw[t][d] = v.min(out.limits.gen_max_kw[t][d]);
    }
    for &(t, v) in &scenario.overrides.demand_kw {
        if t >= horizon {
            return Err(bad("demand_kw", t));
        }
        out.limits.demand_kw[t] = v;
    }
    let mut removed: Vec<usize> = scenario
        .overrides
        .vehicle_available
        .iter()
        .filter(|&&(_, available)| !available)
        .map(|&(i, _)| i)
        .collect();
    for &i in &removed {
        if i >= base.fleet.len() {
            return Err(bad("vehicle", i));
        }
    }
    removed.sort_unstable();
    removed.dedup();
    for &i in removed.iter().rev() {
        out.fleet.remove(i);
    }
    Ok(out)
}

/// Materializes a scenario against a full placement instance, including
/// transport-edge changes.
pub fn apply_to_csp<S: Scalar>(
    scenario: &Scenario<S>,
    base: &CSPInstance<S>,
) -> Result<CSPInstance<S>> {
    let mut out = base.clone();
    out.v2g = apply_to_v2g(scenario, &base.v2g)?;
    let mut outages: Vec<usize> = Vec::new();
    for &(e, tt) in &scenario.overrides.edge_travel_time {
        if e >= base.graph.edges.len() {
            return Err(Error::BadScenarioOverride {
                scenario: scenario.id.clone(),
                what: "edge",
                index: e,
            });
        }
        match tt {
            Some(steps) => out.graph.edges[e].travel_time = steps.max(1),
            None => outages.push(e),
        }
    }
    outages.sort_unstable();
    outages.dedup();
    for &e in outages.iter().rev() {
        out.graph.edges.remove(e);
    }
    // drop auxiliary entries of removed vehicles
    let ids: std::collections::HashSet<&str> =
        out.v2g.fleet.iter().map(|v| v.id.as_str()).collect();
    out.transport_cost.retain(|k, _| ids.contains(k.as_str()));
    out.initial_location.retain(|k, _| ids.contains(k.as_str()));
    Ok(out)
}

/// Which variables are shared across scenarios (here-and-now) rather
/// than copied per scenario (wait-and-see).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageMode {
    /// Every variable is scenario-local.
    #[default]
    WaitAndSee,
    /// Presence and traversal decisions are first-stage, shared by all
    /// scenarios; dispatch remains scenario-local.
    FirstStageRouting,
}

fn scenario_prefix(idx: usize) -> String {
    format!("w{idx}:")
}

/// Merges `sub` into `target`: variables renamed with `prefix` (except
/// shared ones), constraints and exclusions copied, objective scaled.
fn merge_scaled<S: Scalar>(
    target: &mut StructuredModel<S>,
    sub: &StructuredModel<S>,
    prefix: &str,
    scale: S,
    shared: impl Fn(VarRole) -> bool,
) -> Result<()> {
    let mut remap = Vec::with_capacity(sub.num_variables());
    for var in sub.variables() {
        let name = if shared(var.role) {
            var.name.clone()
        } else {
            format!("{prefix}{}", var.name)
        };
        let id = match target.var_id(&name) {
            Ok(id) => id,
            Err(_) => target.add_variable(name, var.kind, var.role, var.lower, var.upper)?,
        };
        remap.push(id);
    }
    for c in &sub.constraints {
        let mut expr = LinExpr::new();
        expr.constant = c.expr.constant;
        for &(id, coeff) in &c.expr.terms {
            expr.push(remap[id.0], coeff);
        }
        target.add_constraint(
            format!("{prefix}{}", c.label),
            expr,
            c.relation,
            c.rhs,
            c.class,
        );
    }
    for &(a, b) in &sub.bilinear_exclusions {
        target.add_exclusion(remap[a.0], remap[b.0]);
    }
    for &(id, coeff) in &sub.objective.terms {
        target.objective.push(remap[id.0], scale * coeff);
    }
    target.objective.add_constant(scale * sub.objective.constant);
    Ok(())
}

/// Stochastic bi-objective dispatch model: one constraint copy per
/// scenario, objective `sum_w pi_w (w1 energy_w + w2 unserved_w)` with
/// the weights taken from the scenario set.
pub fn build_stochastic_v2g<S: Scalar>(
    instance: &V2GInstance<S>,
    set: &ScenarioSet<S>,
) -> Result<StructuredModel<S>> {
    build_stochastic_v2g_with(instance, set, StageMode::WaitAndSee)
}

pub fn build_stochastic_v2g_with<S: Scalar>(
    instance: &V2GInstance<S>,
    set: &ScenarioSet<S>,
    mode: StageMode,
) -> Result<StructuredModel<S>> {
    if set.is_empty() {
        return Err(Error::EmptyScenarioSet);
    }
    if !matches!(instance.objective_mode, ObjectiveMode::Weighted { .. }) {
        return Err(Error::InvalidInstance(
            "stochastic dispatch requires objective_mode = weighted".into(),
        ));
    }
    let mut model = StructuredModel::new("v2g_stochastic");
    for (idx, scenario) in set.scenarios().iter().enumerate() {
        let mut materialized = apply_to_v2g(scenario, instance)?;
        materialized.objective_mode = ObjectiveMode::Weighted {
            w1: set.w1,
            w2: set.w2,
        };
        let sub = build_weighted_model(&materialized)?;
        let share = |role: VarRole| {
            mode == StageMode::FirstStageRouting
                && matches!(role, VarRole::Presence | VarRole::Traversal)
        };
        merge_scaled(
            &mut model,
            &sub,
            &scenario_prefix(idx),
            scenario.probability,
            share,
        )?;
    }
    Ok(model)
}

/// Stochastic placement model: scenario-indexed restoration terms with
/// per-scenario mobility honoring edge outages. The bi-objective weights
/// do not apply here — the objective is the probability-weighted sum of
/// full restoration costs.
pub fn build_stochastic_csp<S: Scalar>(
    instance: &CSPInstance<S>,
    set: &ScenarioSet<S>,
) -> Result<StructuredModel<S>> {
    build_stochastic_csp_with(instance, set, StageMode::WaitAndSee)
}

pub fn build_stochastic_csp_with<S: Scalar>(
    instance: &CSPInstance<S>,
    set: &ScenarioSet<S>,
    mode: StageMode,
) -> Result<StructuredModel<S>> {
    if set.is_empty() {
        return Err(Error::EmptyScenarioSet);
    }
    let mut model = StructuredModel::new("csp_stochastic");
    for (idx, scenario) in set.scenarios().iter().enumerate() {
        let materialized = apply_to_csp(scenario, instance)?;
        let sub = crate::csp::build_csp_model_scenario(&materialized)?;
        let share = |role: VarRole| {
            mode == StageMode::FirstStageRouting
                && matches!(role, VarRole::Presence | VarRole::Traversal)
        };
        merge_scaled(
            &mut model,
            &sub,
            &scenario_prefix(idx),
            scenario.probability,
            share,
        )?;
    }
    Ok(model)
}

/// Restriction of a stochastic-model assignment to one scenario's
/// variables, with the scenario prefix stripped; shared (unprefixed)
/// variables pass through.
pub fn project_scenario_assignment<S: Scalar>(a: &Assignment<S>, idx: usize) -> Assignment<S> {
    let prefix = scenario_prefix(idx);
    let mut out = Assignment::new();
    for (name, &value) in a.iter() {
        if let Some(stripped) = name.strip_prefix(&prefix) {
            out.set(stripped.to_string(), value);
        } else if !name.contains(':') {
            out.set(name.clone(), value);
        }
    }
    out
}
