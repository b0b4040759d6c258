//! Deterministic synthetic instances.
//!
//! Generated instances are commensurate with their target discretization:
//! the state-of-charge grid step is 1 kWh and the per-level charge and
//! discharge energies equal exactly one grid step, so the discretized
//! models have rich feasible sets and integer violation quanta. Prices
//! follow a peak/off-peak shape with seeded jitter; generation covers
//! demand plus reserve so the idle schedule stays feasible; transport
//! graphs are random-geometric with a connectivity chain fallback.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use evgrid_core::csp::{Edge, TransportGraph};
use evgrid_core::v2g::{GridLimits, ObjectiveMode, PriceSeries, TimeGrid, VehicleSpec};
use evgrid_core::{CspInstance64, V2gInstance64};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateParams {
    pub vehicles: usize,
    pub steps: usize,
    /// Transport graph size; placement instances only.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Fraction of graph nodes carrying critical load.
    #[serde(default = "default_crit_fraction")]
    pub crit_fraction: f64,
    /// Power discretization levels the instance is aligned with.
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_soc_levels")]
    pub soc_levels: usize,
    pub seed: u64,
}

fn default_nodes() -> usize {
    3
}
fn default_crit_fraction() -> f64 {
    0.67
}
fn default_levels() -> usize {
    2
}
fn default_soc_levels() -> usize {
    3
}

impl GenerateParams {
    fn validate(&self) -> Result<(), CliError> {
        if self.vehicles == 0 {
            return Err(CliError::Invariant("need at least one vehicle".into()));
        }
        if self.steps == 0 {
            return Err(CliError::Invariant("need at least one timestep".into()));
        }
        if self.nodes == 0 {
            return Err(CliError::Invariant("need at least one node".into()));
        }
        if self.levels < 2 || self.soc_levels < 2 {
            return Err(CliError::Invariant(
                "need at least two discretization levels".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.crit_fraction) {
            return Err(CliError::Invariant("crit_fraction must be in [0,1]".into()));
        }
        Ok(())
    }

    pub fn instance_id(&self, kind: &str) -> String {
        format!(
            "{kind}_v{}_t{}_s{}",
            self.vehicles, self.steps, self.seed
        )
    }
}

fn fleet(rng: &mut ChaCha8Rng, params: &GenerateParams) -> Vec<VehicleSpec<f64>> {
    let soc_step = 1.0;
    (0..params.vehicles)
        .map(|i| {
            let eta_ch = [0.8, 0.9, 1.0][rng.random_range(0..3usize)];
            let eta_dis = [0.8, 0.9, 1.0][rng.random_range(0..3usize)];
            let soc_min = 2.0;
            let soc_max = soc_min + (params.soc_levels - 1) as f64 * soc_step;
            let init_level = rng.random_range(0..params.soc_levels);
            VehicleSpec {
                id: format!("ev{i}"),
                // one charge level moves the battery exactly one grid step
                max_charge_kw: params.levels as f64 * soc_step / eta_ch,
                max_discharge_kw: params.levels as f64 * soc_step * eta_dis,
                charge_efficiency: eta_ch,
                discharge_efficiency: eta_dis,
                soc_min_kwh: soc_min,
                soc_max_kwh: soc_max,
                soc_initial_kwh: soc_min + init_level as f64 * soc_step,
                reactive_ratio: 0.0,
                battery_cost_per_kwh: 0.0,
            }
        })
        .collect()
}

fn prices(rng: &mut ChaCha8Rng, steps: usize) -> PriceSeries<f64> {
    let shape = |t: usize| (std::f64::consts::PI * (t as f64 + 0.5) / steps as f64).sin();
    let charge = (0..steps)
        .map(|t| 0.10 + 0.20 * shape(t) + rng.random_range(0.0..0.05))
        .collect();
    let discharge = (0..steps)
        .map(|t| 0.12 + 0.30 * shape(t) + rng.random_range(0.0..0.05))
        .collect();
    PriceSeries {
        charge_per_kwh: charge,
        discharge_per_kwh: discharge,
    }
}

fn limits(
    rng: &mut ChaCha8Rng,
    steps: usize,
    locations: usize,
    fleet: &[VehicleSpec<f64>],
) -> GridLimits<f64> {
    let total_dis: f64 = fleet.iter().map(|v| v.max_discharge_kw).sum();
    let mut gen = Vec::with_capacity(steps);
    let mut gen_max = Vec::with_capacity(steps);
    let mut demand = Vec::with_capacity(steps);
    let mut reserve = Vec::with_capacity(steps);
    let mut crit_cost = Vec::with_capacity(steps);
    let mut gen_cost = Vec::with_capacity(steps);
    let mut crit = Vec::with_capacity(steps);
    for _ in 0..steps {
        let d: f64 = rng.random_range(0.5..2.0);
        let r: f64 = rng.random_range(0.0..0.5);
        // generation covers demand + reserve so idle schedules stay feasible
        let g_total = d + r + rng.random_range(0.5..2.0);
        let per_loc = g_total / locations as f64;
        gen.push(vec![per_loc; locations]);
        gen_max.push(vec![per_loc * 2.0; locations]);
        demand.push(d);
        reserve.push(r);
        crit_cost.push(
            (0..locations)
                .map(|_| rng.random_range(2.0..10.0))
                .collect(),
        );
        gen_cost.push(
            (0..locations)
                .map(|_| rng.random_range(0.2..1.0))
                .collect(),
        );
        crit.push(
            (0..locations)
                .map(|_| rng.random_range(0.4..3.0))
                .collect(),
        );
    }
    GridLimits {
        gen_kw: gen,
        gen_max_kw: gen_max,
        demand_kw: demand,
        spinning_reserve_kw: reserve,
        line_p_max_kw: total_dis + 5.0,
        line_q_max_kvar: total_dis + 5.0,
        crit_cost_per_kwh: crit_cost,
        gen_cost_per_kwh: gen_cost,
        crit_kw: crit,
    }
}

/// Deterministic dispatch instance (cost mode, one location).
pub fn generate_v2g(params: &GenerateParams) -> Result<V2gInstance64, CliError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let fleet = fleet(&mut rng, params);
    let prices = prices(&mut rng, params.steps);
    let limits = limits(&mut rng, params.steps, 1, &fleet);
    let instance = V2gInstance64 {
        grid: TimeGrid {
            horizon_steps: params.steps,
            step_hours: 1.0,
        },
        fleet,
        prices,
        limits,
        locations: vec!["n0".into()],
        objective_mode: ObjectiveMode::Cost,
    };
    instance.validate().map_err(CliError::invariant)?;
    Ok(instance)
}

/// Deterministic placement instance: random-geometric transport graph,
/// critical loads on a fraction of nodes, contingency objective.
pub fn generate_csp(params: &GenerateParams) -> Result<CspInstance64, CliError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0xC5D0_17AB_3F00_21E9);
    let nodes: Vec<String> = (0..params.nodes).map(|i| format!("n{i}")).collect();
    let positions: Vec<(f64, f64)> = (0..params.nodes)
        .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
        .collect();

    let mut edges = Vec::new();
    for i in 0..params.nodes {
        for j in (i + 1)..params.nodes {
            let dx = positions[i].0 - positions[j].0;
            let dy = positions[i].1 - positions[j].1;
            let dist = (dx * dx + dy * dy).sqrt();
            if dist < 0.6 {
                edges.push(Edge {
                    a: nodes[i].clone(),
                    b: nodes[j].clone(),
                    travel_time: (dist * 3.0).ceil().max(1.0) as u32,
                    cost_weight: 1.0,
                });
            }
        }
    }
    // connectivity fallback: bridge components in index order
    let mut component: Vec<usize> = (0..params.nodes).collect();
    fn root(component: &mut Vec<usize>, mut i: usize) -> usize {
        while component[i] != i {
            component[i] = component[component[i]];
            i = component[i];
        }
        i
    }
    let index_of = |name: &str, nodes: &[String]| nodes.iter().position(|n| n == name).unwrap();
    for e in &edges {
        let (a, b) = (index_of(&e.a, &nodes), index_of(&e.b, &nodes));
        let (ra, rb) = (root(&mut component, a), root(&mut component, b));
        component[ra] = rb;
    }
    for i in 1..params.nodes {
        let (ra, rb) = (root(&mut component, i - 1), root(&mut component, i));
        if ra != rb {
            edges.push(Edge {
                a: nodes[i - 1].clone(),
                b: nodes[i].clone(),
                travel_time: rng.random_range(1..3u32),
                cost_weight: 1.0,
            });
            component[ra] = rb;
        }
    }
    let graph = TransportGraph {
        nodes: nodes.clone(),
        edges,
        directed: false,
    };

    let num_locations = ((params.nodes as f64 * params.crit_fraction).ceil() as usize)
        .clamp(1, params.nodes);
    let locations: Vec<String> = nodes[..num_locations].to_vec();

    let fleet = fleet(&mut rng, params);
    let prices = prices(&mut rng, params.steps);
    let limits = limits(&mut rng, params.steps, num_locations, &fleet);

    let mut ev_cap = BTreeMap::new();
    for loc in &locations {
        ev_cap.insert(
            loc.clone(),
            rng.random_range(1..=params.vehicles.max(1)) as u32,
        );
    }
    let mut transport_cost = BTreeMap::new();
    let mut initial_location = BTreeMap::new();
    for veh in &fleet {
        transport_cost.insert(veh.id.clone(), rng.random_range(0.02..0.2));
        let loc = locations[rng.random_range(0..locations.len())].clone();
        initial_location.insert(veh.id.clone(), loc);
    }

    let instance = CspInstance64 {
        v2g: V2gInstance64 {
            grid: TimeGrid {
                horizon_steps: params.steps,
                step_hours: 1.0,
            },
            fleet,
            prices,
            limits,
            locations,
            objective_mode: ObjectiveMode::Contingency,
        },
        graph,
        ev_cap,
        transport_cost,
        initial_location,
    };
    instance.validate().map_err(CliError::invariant)?;
    Ok(instance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(seed: u64) -> GenerateParams {
        GenerateParams {
            vehicles: 2,
            steps: 4,
            nodes: 3,
            crit_fraction: 0.67,
            levels: 2,
            soc_levels: 3,
            seed,
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(
            generate_v2g(&params(7)).unwrap(),
            generate_v2g(&params(7)).unwrap()
        );
        assert_eq!(
            generate_csp(&params(7)).unwrap(),
            generate_csp(&params(7)).unwrap()
        );
        assert_ne!(
            generate_csp(&params(7)).unwrap(),
            generate_csp(&params(8)).unwrap()
        );
    }

    #[test]
    fn generated_instances_validate() {
        for seed in 0..20 {
            let v2g = generate_v2g(&params(seed)).unwrap();
            v2g.validate().unwrap();
            let csp = generate_csp(&params(seed)).unwrap();
            csp.validate().unwrap();
            assert!(!csp.graph.edges.is_empty());
        }
    }

    #[test]
    fn zero_sizes_are_rejected() {
        let mut bad = params(1);
        bad.vehicles = 0;
        assert!(matches!(generate_v2g(&bad), Err(CliError::Invariant(_))));
        let mut bad = params(1);
        bad.steps = 0;
        assert!(matches!(generate_csp(&bad), Err(CliError::Invariant(_))));
    }

    #[test]
    fn commensurate_alignment_holds() {
        let v2g = generate_v2g(&params(3)).unwrap();
        for veh in &v2g.fleet {
            let h_ch = veh.max_charge_kw / 2.0; // levels = 2
            let h_dis = veh.max_discharge_kw / 2.0;
            // one charge level = 1 kWh in, one discharge level = 1 kWh out
            assert!((veh.charge_efficiency * h_ch - 1.0).abs() < 1e-9);
            assert!((h_dis / veh.discharge_efficiency - 1.0).abs() < 1e-9);
            assert!(veh.soc_initial_kwh.fract().abs() < 1e-9);
        }
    }
}
