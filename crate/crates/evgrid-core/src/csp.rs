//! Mobile charging-asset placement: the transport graph, the combined
//! restoration-cost model, mobility constraints, and route-plan
//! validation.
//!
//! Movement semantics: a vehicle connected at node `d1` can appear at
//! `d2` no earlier than the shortest travel time between them (pairwise
//! exclusions on presence indicators). Edge traversals are explicit
//! binary variables linked to presence transitions by departure/arrival
//! consistency constraints; transport cost counts weighted traversals.
//! [`validate_route_plan`] checks exactly the same three constraint
//! families, so its violation report and the built model's violated
//! constraints coincide.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Assignment, ConstraintClass, LinExpr, Relation, StructuredModel, VarRole,
};
use crate::scalar::Scalar;
use crate::v2g::{self, ObjectiveMode, V2GInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge<S> {
    pub a: String,
    pub b: String,
    /// Whole timesteps needed to traverse the edge, at least 1.
    pub travel_time: u32,
    /// Unitless transport-cost weight, multiplied with the vehicle's
    /// per-traversal cost.
    pub cost_weight: S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportGraph<S> {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge<S>>,
    /// Edges are undirected unless declared otherwise.
    #[serde(default)]
    pub directed: bool,
}

/// Travel time between two nodes, in timesteps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Travel {
    Steps(u32),
    Unreachable,
}

impl Travel {
    pub fn steps(self) -> Option<u32> {
        match self {
            Travel::Steps(s) => Some(s),
            Travel::Unreachable => None,
        }
    }
}

impl<S: Scalar> TransportGraph<S> {
    /// Structural checks plus connectivity over the load locations.
    pub fn validate(&self, locations: &[String]) -> Result<()> {
        self.validate_structure(locations)?;
        for d1 in locations {
            for d2 in locations {
                if shortest_travel_time(self, d1, d2)? == Travel::Unreachable {
                    return Err(Error::InvalidInstance(format!(
                        "load locations {d1} and {d2} are not connected"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Node/edge sanity without the connectivity requirement; scenario
    /// outages may legitimately cut locations off.
    pub fn validate_structure(&self, locations: &[String]) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for n in &self.nodes {
            if !seen.insert(n) {
                return Err(Error::InvalidInstance(format!("duplicate graph node {n}")));
            }
        }
        for e in &self.edges {
            if e.travel_time < 1 {
                return Err(Error::InvalidInstance(format!(
                    "edge {}-{} has travel_time 0",
                    e.a, e.b
                )));
            }
            if e.cost_weight < S::zero() {
                return Err(Error::InvalidInstance(format!(
                    "edge {}-{} has negative cost weight",
                    e.a, e.b
                )));
            }
            for n in [&e.a, &e.b] {
                if !self.nodes.contains(n) {
                    return Err(Error::UnknownNode(n.clone()));
                }
            }
        }
        for d in locations {
            if !self.nodes.contains(d) {
                return Err(Error::UnknownNode(d.clone()));
            }
        }
        Ok(())
    }

    fn node_index(&self, name: &str) -> Result<usize> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownNode(name.to_string()))
    }

    /// Directed arcs as `(from, to, travel_time, weight)` index tuples;
    /// undirected edges yield both directions.
    fn arcs(&self) -> Result<Vec<(usize, usize, u32, S)>> {
        let mut arcs = Vec::with_capacity(self.edges.len() * 2);
        for e in &self.edges {
            let a = self.node_index(&e.a)?;
            let b = self.node_index(&e.b)?;
            arcs.push((a, b, e.travel_time, e.cost_weight));
            if !self.directed {
                arcs.push((b, a, e.travel_time, e.cost_weight));
            }
        }
        Ok(arcs)
    }
}

/// Minimum-total-travel-time path length between two nodes, by Dijkstra
/// over integer edge times. `rt(d, d) = 0`; unreachable pairs are
/// reported explicitly, never as an error. Travel time is
/// vehicle-independent: the graph is the single source of truth.
pub fn shortest_travel_time<S: Scalar>(
    graph: &TransportGraph<S>,
    from: &str,
    to: &str,
) -> Result<Travel> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let src = graph.node_index(from)?;
    let dst = graph.node_index(to)?;
    if src == dst {
        return Ok(Travel::Steps(0));
    }
    let arcs = graph.arcs()?;
    let mut adj: Vec<Vec<(usize, u32)>> = vec![Vec::new(); graph.nodes.len()];
    for (a, b, t, _) in arcs {
        adj[a].push((b, t));
    }
    let mut dist: Vec<Option<u32>> = vec![None; graph.nodes.len()];
    let mut heap = BinaryHeap::new();
    dist[src] = Some(0);
    heap.push(Reverse((0u32, src)));
    while let Some(Reverse((d, u))) = heap.pop() {
        if dist[u] != Some(d) {
            continue;
        }
        if u == dst {
            return Ok(Travel::Steps(d));
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if dist[v].map_or(true, |cur| nd < cur) {
                dist[v] = Some(nd);
                heap.push(Reverse((nd, v)));
            }
        }
    }
    Ok(Travel::Unreachable)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSPInstance<S> {
    pub v2g: V2GInstance<S>,
    pub graph: TransportGraph<S>,
    /// Max EVs connectable per location; a missing entry means unbounded.
    pub ev_cap: BTreeMap<String, u32>,
    /// Per-vehicle transport cost, $ per weighted traversal.
    pub transport_cost: BTreeMap<String, S>,
    pub initial_location: BTreeMap<String, String>,
}

impl<S: Scalar> CSPInstance<S> {
    pub fn validate(&self) -> Result<()> {
        self.graph.validate(&self.v2g.locations)?;
        self.validate_relaxed()
    }

    /// Everything except graph connectivity, which scenario outages may
    /// break on purpose.
    pub(crate) fn validate_relaxed(&self) -> Result<()> {
        self.v2g.validate()?;
        self.graph.validate_structure(&self.v2g.locations)?;
        for veh in &self.v2g.fleet {
            let loc = self
                .initial_location
                .get(&veh.id)
                .ok_or_else(|| {
                    Error::InvalidInstance(format!("vehicle {} has no initial location", veh.id))
                })?;
            if !self.graph.nodes.contains(loc) {
                return Err(Error::UnknownNode(loc.clone()));
            }
            if !self.transport_cost.contains_key(&veh.id) {
                return Err(Error::InvalidInstance(format!(
                    "vehicle {} has no transport cost",
                    veh.id
                )));
            }
        }
        for loc in self.ev_cap.keys() {
            if !self.graph.nodes.contains(loc) {
                return Err(Error::UnknownNode(loc.clone()));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.v2g.horizon()
    }
}

pub(crate) fn traversal_var(vehicle: &str, from: &str, to: &str, t: usize) -> String {
    format!("move[{vehicle},{from}>{to},{t}]")
}

/// Builds the full placement model: the location-indexed contingency
/// core, battery-wear and transport objective terms, traversal
/// variables with departure/arrival linkage, node capacities, and
/// travel-time exclusions. Presence at nodes unreachable from a
/// vehicle's initial location within `t` steps is pinned to zero.
pub fn build_csp_model<S: Scalar>(instance: &CSPInstance<S>) -> Result<StructuredModel<S>> {
    instance.validate()?;
    build_csp_model_prevalidated(instance)
}

/// Builder entry for scenario-materialized instances, where outages may
/// have disconnected locations; unreachable pairs surface as full
/// travel-time exclusions instead of a validation error.
pub(crate) fn build_csp_model_scenario<S: Scalar>(
    instance: &CSPInstance<S>,
) -> Result<StructuredModel<S>> {
    instance.validate_relaxed()?;
    build_csp_model_prevalidated(instance)
}

fn build_csp_model_prevalidated<S: Scalar>(
    instance: &CSPInstance<S>,
) -> Result<StructuredModel<S>> {
    if !matches!(instance.v2g.objective_mode, ObjectiveMode::Contingency) {
        return Err(Error::InvalidInstance(
            "build_csp_model requires objective_mode = contingency".into(),
        ));
    }
    let mut model = v2g::build_located_core(&instance.v2g, "csp")?;
    v2g::add_unserved_objective(&mut model, &instance.v2g, S::one())?;
    v2g::add_generation_cost(&mut model, &instance.v2g, S::one());

    let horizon = instance.horizon();
    let dt = instance.v2g.grid.step_hours;

    // battery wear: C_bat * (charge + discharge) * dt
    for veh in &instance.v2g.fleet {
        if veh.battery_cost_per_kwh == S::zero() {
            continue;
        }
        for t in 0..horizon {
            for loc in &instance.v2g.locations {
                let pch = model.var_id(&v2g::charge_var_at(&veh.id, t, loc))?;
                let pdis = model.var_id(&v2g::discharge_var_at(&veh.id, t, loc))?;
                model.objective.push(pch, veh.battery_cost_per_kwh * dt);
                model.objective.push(pdis, veh.battery_cost_per_kwh * dt);
            }
        }
    }

    // traversal variables and transport cost
    let arcs = instance.graph.arcs()?;
    for veh in &instance.v2g.fleet {
        let c_tran = instance.transport_cost[&veh.id];
        for &(a, b, tau, weight) in &arcs {
            let from = &instance.graph.nodes[a];
            let to = &instance.graph.nodes[b];
            for t in 0..horizon.saturating_sub(tau as usize) {
                let mv = model.add_binary(
                    traversal_var(&veh.id, from, to, t),
                    VarRole::Traversal,
                )?;
                model.objective.push(mv, c_tran * weight);
            }
        }
    }

    let mut model = add_mobility_constraints(model, instance)?;
    add_travel_links(&mut model, instance)?;

    // initial-location reachability: z and the gated powers at nodes the
    // vehicle cannot have reached yet are fixed at zero
    for veh in &instance.v2g.fleet {
        let start = &instance.initial_location[&veh.id];
        for loc in &instance.v2g.locations {
            let reach = shortest_travel_time(&instance.graph, start, loc)?;
            let min_t = match reach {
                Travel::Steps(s) => s as usize,
                Travel::Unreachable => horizon,
            };
            for t in 0..min_t.min(horizon) {
                let z = model.var_id(&v2g::presence_var(&veh.id, t, loc))?;
                model.fix_variable(z, S::zero());
                let pch = model.var_id(&v2g::charge_var_at(&veh.id, t, loc))?;
                let pdis = model.var_id(&v2g::discharge_var_at(&veh.id, t, loc))?;
                model.fix_variable(pch, S::zero());
                model.fix_variable(pdis, S::zero());
            }
        }
    }
    Ok(model)
}

/// Adds node EV-capacity constraints and pairwise travel-time exclusions
/// `z[i,t,d1] + z[i,t+tau,d2] <= 1` for every `tau` up to the shortest
/// travel time (every feasible `tau` when the pair is unreachable).
pub fn add_mobility_constraints<S: Scalar>(
    mut model: StructuredModel<S>,
    instance: &CSPInstance<S>,
) -> Result<StructuredModel<S>> {
    let horizon = instance.horizon();

    for (d, loc) in instance.v2g.locations.iter().enumerate() {
        let Some(&cap) = instance.ev_cap.get(loc) else {
            continue; // unbounded
        };
        let _ = d;
        for t in 0..horizon {
            let mut expr = LinExpr::new();
            for veh in &instance.v2g.fleet {
                let z = model.var_id(&v2g::presence_var(&veh.id, t, loc))?;
                expr.push(z, S::one());
            }
            if expr.terms.is_empty() {
                continue;
            }
            model.add_constraint(
                format!("cap[{loc},{t}]"),
                expr,
                Relation::Le,
                S::from_u32(cap).expect("u32 fits scalar"),
                ConstraintClass::EvCapacity,
            );
        }
    }

    for veh in &instance.v2g.fleet {
        for d1 in &instance.v2g.locations {
            for d2 in &instance.v2g.locations {
                if d1 == d2 {
                    continue;
                }
                let rt = shortest_travel_time(&instance.graph, d1, d2)?;
                for t in 0..horizon {
                    let max_tau = horizon - 1 - t;
                    let tau_hi = match rt {
                        Travel::Steps(s) => (s as usize).min(max_tau),
                        Travel::Unreachable => max_tau,
                    };
                    for tau in 1..=tau_hi {
                        let z1 = model.var_id(&v2g::presence_var(&veh.id, t, d1))?;
                        let z2 = model.var_id(&v2g::presence_var(&veh.id, t + tau, d2))?;
                        let mut expr = LinExpr::new();
                        expr.push(z1, S::one());
                        expr.push(z2, S::one());
                        model.add_constraint(
                            format!("tt[{},{}@{},{}@{}]", veh.id, d1, t, d2, t + tau),
                            expr,
                            Relation::Le,
                            S::one(),
                            ConstraintClass::Mobility,
                        );
                    }
                }
            }
        }
    }
    Ok(model)
}

/// Arrival consistency: connecting at a node the vehicle was not
/// connected to one step earlier requires an incoming traversal
/// completing that step. The vehicle's initial location is exempt — a
/// vehicle may sit unplugged at home and connect later without moving.
/// Disconnecting never requires a traversal, and transit gaps are
/// already forced by the travel-time exclusions (every travel time is
/// at least one step).
fn add_travel_links<S: Scalar>(
    model: &mut StructuredModel<S>,
    instance: &CSPInstance<S>,
) -> Result<()> {
    let horizon = instance.horizon();
    let arcs = instance.graph.arcs()?;
    for veh in &instance.v2g.fleet {
        let home = &instance.initial_location[&veh.id];
        for loc in &instance.v2g.locations {
            if loc == home {
                continue;
            }
            let li = instance.graph.node_index(loc)?;
            for t in 1..horizon {
                // z[t,loc] - z[t-1,loc] <= traversals completing at t
                let mut expr = LinExpr::new();
                let z_now = model.var_id(&v2g::presence_var(&veh.id, t, loc))?;
                let z_prev = model.var_id(&v2g::presence_var(&veh.id, t - 1, loc))?;
                expr.push(z_now, S::one());
                expr.push(z_prev, -S::one());
                for &(a, b, tau, _) in &arcs {
                    if b == li && t >= tau as usize {
                        let start = t - tau as usize;
                        let mv = model.var_id(&traversal_var(
                            &veh.id,
                            &instance.graph.nodes[a],
                            &instance.graph.nodes[b],
                            start,
                        ))?;
                        expr.push(mv, -S::one());
                    }
                }
                model.add_constraint(
                    format!("arr[{},{},{}]", veh.id, loc, t),
                    expr,
                    Relation::Le,
                    S::zero(),
                    ConstraintClass::TravelLink,
                );
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// route plans
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraversalRecord {
    /// Step at which the traversal starts.
    pub timestep: usize,
    pub from: String,
    pub to: String,
}

/// Per-vehicle presence records `(timestep, location)` and traversed
/// edges, the explicit form of a routing decision.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    pub presence: BTreeMap<String, Vec<(usize, String)>>,
    pub traversals: BTreeMap<String, Vec<TraversalRecord>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RouteViolation {
    Capacity {
        location: String,
        timestep: usize,
        connected: usize,
        cap: u32,
    },
    TravelTime {
        vehicle: String,
        from: String,
        depart: usize,
        to: String,
        arrive: usize,
    },
    Inconsistency {
        vehicle: String,
        timestep: usize,
        detail: String,
    },
}

impl RouteViolation {
    /// Label of the corresponding model constraint, when one exists.
    pub fn model_label(&self) -> Option<String> {
        match self {
            RouteViolation::Capacity {
                location, timestep, ..
            } => Some(format!("cap[{location},{timestep}]")),
            RouteViolation::TravelTime {
                vehicle,
                from,
                depart,
                to,
                arrive,
            } => Some(format!("tt[{vehicle},{from}@{depart},{to}@{arrive}]")),
            RouteViolation::Inconsistency { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<RouteViolation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks a route plan against node capacities, travel-time exclusions,
/// initial-location reachability, and presence/traversal consistency —
/// the same rules the built model enforces.
pub fn validate_route_plan<S: Scalar>(
    instance: &CSPInstance<S>,
    plan: &RoutePlan,
) -> Result<ValidationReport> {
    let horizon = instance.horizon();
    let mut violations = Vec::new();

    // per-vehicle location-by-step tables
    let mut location_of: BTreeMap<&str, Vec<Option<&str>>> = BTreeMap::new();
    for veh in &instance.v2g.fleet {
        location_of.insert(veh.id.as_str(), vec![None; horizon]);
    }
    for (veh, records) in &plan.presence {
        let Some(table) = location_of.get_mut(veh.as_str()) else {
            continue;
        };
        for (t, loc) in records {
            if *t >= horizon {
                violations.push(RouteViolation::Inconsistency {
                    vehicle: veh.clone(),
                    timestep: *t,
                    detail: "presence outside the horizon".into(),
                });
                continue;
            }
            match table[*t] {
                None => table[*t] = Some(loc.as_str()),
                Some(first) if first != loc => {
                    violations.push(RouteViolation::Inconsistency {
                        vehicle: veh.clone(),
                        timestep: *t,
                        detail: format!("connected at both {first} and {loc}"),
                    });
                }
                Some(_) => {}
            }
        }
    }

    // node capacities
    for (loc, &cap) in &instance.ev_cap {
        for t in 0..horizon {
            let connected = location_of
                .values()
                .filter(|table| table[t] == Some(loc.as_str()))
                .count();
            if connected > cap as usize {
                violations.push(RouteViolation::Capacity {
                    location: loc.clone(),
                    timestep: t,
                    connected,
                    cap,
                });
            }
        }
    }

    // pairwise travel-time exclusions and start reachability
    for (veh, table) in &location_of {
        let start = &instance.initial_location[*veh];
        for t2 in 0..horizon {
            let Some(d2) = table[t2] else { continue };
            let reach = shortest_travel_time(&instance.graph, start, d2)?;
            let min_t = reach.steps().map(|s| s as usize).unwrap_or(horizon);
            if t2 < min_t {
                violations.push(RouteViolation::Inconsistency {
                    vehicle: veh.to_string(),
                    timestep: t2,
                    detail: format!("cannot reach {d2} from {start} by step {t2}"),
                });
            }
            for t1 in 0..t2 {
                let Some(d1) = table[t1] else { continue };
                if d1 == d2 {
                    continue;
                }
                let tau = t2 - t1;
                let excluded = match shortest_travel_time(&instance.graph, d1, d2)? {
                    Travel::Steps(rt) => tau <= rt as usize,
                    Travel::Unreachable => true,
                };
                if excluded {
                    violations.push(RouteViolation::TravelTime {
                        vehicle: veh.to_string(),
                        from: d1.to_string(),
                        depart: t1,
                        to: d2.to_string(),
                        arrive: t2,
                    });
                }
            }
        }
    }

    // arrival traversal consistency, mirroring the model's travel links
    let empty = Vec::new();
    for (veh, table) in &location_of {
        let home = &instance.initial_location[*veh];
        let records = plan.traversals.get(*veh).unwrap_or(&empty);
        let edge_time = |from: &str, to: &str| -> Option<u32> {
            instance.graph.edges.iter().find_map(|e| {
                let forward = e.a == from && e.b == to;
                let backward = !instance.graph.directed && e.b == from && e.a == to;
                (forward || backward).then_some(e.travel_time)
            })
        };
        for r in records {
            if edge_time(&r.from, &r.to).is_none() {
                violations.push(RouteViolation::Inconsistency {
                    vehicle: veh.to_string(),
                    timestep: r.timestep,
                    detail: format!("traversal {}>{} is not a graph edge", r.from, r.to),
                });
            }
        }
        for t in 1..horizon {
            let Some(d) = table[t] else { continue };
            if d == home.as_str() || table[t - 1] == Some(d) {
                continue;
            }
            let has_arrival = records.iter().any(|r| {
                r.to == d
                    && edge_time(&r.from, &r.to)
                        .map_or(false, |tau| r.timestep + tau as usize == t)
            });
            if !has_arrival {
                violations.push(RouteViolation::Inconsistency {
                    vehicle: veh.to_string(),
                    timestep: t,
                    detail: format!("appeared at {d} with no completing traversal"),
                });
            }
        }
    }

    Ok(ValidationReport { violations })
}

/// Assignment realizing a route plan on a built model: presence and
/// traversal bits from the plan, everything else idle.
pub fn route_plan_assignment<S: Scalar>(
    model: &StructuredModel<S>,
    plan: &RoutePlan,
) -> Assignment<S> {
    let mut a = v2g::idle_assignment(model);
    for (veh, records) in &plan.presence {
        for (t, loc) in records {
            let name = v2g::presence_var(veh, *t, loc);
            if model.var_id(&name).is_ok() {
                a.set(name, S::one());
            }
        }
    }
    for (veh, records) in &plan.traversals {
        for r in records {
            let name = traversal_var(veh, &r.from, &r.to, r.timestep);
            if model.var_id(&name).is_ok() {
                a.set(name, S::one());
            }
        }
    }
    a
}
