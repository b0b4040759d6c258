//! Acceptance suite. Each test exercises one release criterion end to
//! end at its stated tolerance and prints a PASS line with the measured
//! numbers; run with `cargo test --test acceptance -- --nocapture` to
//! see them.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use evgrid_cli::bench::{emit_results, load_config, run_benchmark, strip_wall_time};
use evgrid_cli::generate::{generate_csp, generate_v2g, GenerateParams};
use evgrid_core::csp::{
    build_csp_model, route_plan_assignment, validate_route_plan, Edge, RoutePlan, TransportGraph,
    TraversalRecord,
};
use evgrid_core::model::{evaluate, ConstraintClass, VarKind};
use evgrid_core::qubo::{
    decode, make_power_encoding, make_soc_encoding, penalty_audit, transpile, InequalityMode,
    PenaltyConfig,
};
use evgrid_core::scenario::{
    build_stochastic_v2g, project_scenario_assignment, sample_scenarios, apply_to_v2g,
    PerturbationConfig,
};
use evgrid_core::solve::{
    brute_force, exact_discrete_reference, hybrid_solve, simulated_anneal, AnnealSchedule,
    HybridConfig, ReferenceOutcome,
};
use evgrid_core::v2g::{
    build_v2g_model, build_weighted_model, simulate_soc, ObjectiveMode, TimeGrid, VehicleSpec,
};
use evgrid_core::{CspInstance64, EncodingSet64, Model64, V2gInstance64};

const QUBO_BIT_CAP: usize = 22;

/// The shared verification family: fifty generated dispatch instances
/// spanning 1-2 vehicles, 2-3 steps, and 2-3 discretization levels, each
/// transpiling to at most 22 bits.
fn verification_family() -> Vec<(V2gInstance64, usize, usize)> {
    let combos = [
        (1, 2, 2, 2),
        (1, 2, 2, 3),
        (1, 2, 3, 2),
        (1, 2, 3, 3),
        (1, 3, 2, 2),
        (1, 3, 2, 3),
        (1, 3, 3, 2),
        (2, 2, 2, 2),
    ];
    let mut family = Vec::new();
    let mut seed = 100;
    while family.len() < 50 {
        for &(vehicles, steps, levels, soc_levels) in &combos {
            if family.len() == 50 {
                break;
            }
            let params = GenerateParams {
                vehicles,
                steps,
                nodes: 3,
                crit_fraction: 0.67,
                levels,
                soc_levels,
                seed,
            };
            let instance = generate_v2g(&params).expect("generator");
            let model = build_v2g_model(&instance).expect("builder");
            let encodings =
                EncodingSet64::for_model(&model, levels, soc_levels).expect("encodings");
            let config = PenaltyConfig::dominant_for(
                &model,
                &encodings,
                InequalityMode::SlackBits,
            )
            .expect("penalty config");
            let (q, _) = transpile(&model, config, &encodings).expect("transpile");
            if q.num_bits() <= QUBO_BIT_CAP {
                family.push((instance, levels, soc_levels));
            }
        }
        seed += 1;
    }
    family
}

fn transpiled(
    instance: &V2gInstance64,
    levels: usize,
    soc_levels: usize,
    mode: InequalityMode,
) -> (
    Model64,
    EncodingSet64,
    evgrid_core::Qubo64,
    evgrid_core::qubo::VariableMap<f64>,
) {
    let model = build_v2g_model(instance).expect("builder");
    let encodings = EncodingSet64::for_model(&model, levels, soc_levels).expect("encodings");
    let config = PenaltyConfig::dominant_for(&model, &encodings, mode).expect("penalty");
    let (q, map) = transpile(&model, config, &encodings).expect("transpile");
    (model, encodings, q, map)
}

// ---------------------------------------------------------------------------
// hand-built placement instances for criteria 4 and 8
// ---------------------------------------------------------------------------

fn csp_base(
    horizon: usize,
    locations: Vec<&str>,
    nodes: Vec<&str>,
    edges: Vec<(usize, usize, u32)>,
    soc_levels: usize,
) -> CspInstance64 {
    let num_locations = locations.len();
    let soc_max = 2.0 + (soc_levels - 1) as f64 * 1.0;
    let node_names: Vec<String> = nodes.iter().map(|s| s.to_string()).collect();
    CspInstance64 {
        v2g: V2gInstance64 {
            grid: TimeGrid {
                horizon_steps: horizon,
                step_hours: 1.0,
            },
            fleet: vec![VehicleSpec {
                id: "ev0".into(),
                max_charge_kw: 2.5,
                max_discharge_kw: 1.6,
                charge_efficiency: 0.8,
                discharge_efficiency: 0.8,
                soc_min_kwh: 2.0,
                soc_max_kwh: soc_max,
                soc_initial_kwh: 3.0,
                reactive_ratio: 0.0,
                battery_cost_per_kwh: 0.02,
            }],
            prices: evgrid_core::v2g::PriceSeries {
                charge_per_kwh: vec![0.2; horizon],
                discharge_per_kwh: vec![0.1; horizon],
            },
            limits: evgrid_core::v2g::GridLimits {
                gen_kw: vec![vec![1.0; num_locations]; horizon],
                gen_max_kw: vec![vec![2.0; num_locations]; horizon],
                demand_kw: vec![0.0; horizon],
                spinning_reserve_kw: vec![0.0; horizon],
                line_p_max_kw: 100.0,
                line_q_max_kvar: 100.0,
                crit_cost_per_kwh: vec![vec![4.0; num_locations]; horizon],
                gen_cost_per_kwh: vec![vec![0.5; num_locations]; horizon],
                // far above any achievable discharge: the coverage cap
                // never binds and costs no bits
                crit_kw: vec![vec![5.0; num_locations]; horizon],
            },
            locations: locations.iter().map(|s| s.to_string()).collect(),
            objective_mode: ObjectiveMode::Contingency,
        },
        graph: TransportGraph {
            nodes: node_names.clone(),
            edges: edges
                .into_iter()
                .map(|(a, b, tt)| Edge {
                    a: node_names[a].clone(),
                    b: node_names[b].clone(),
                    travel_time: tt,
                    cost_weight: 1.0,
                })
                .collect(),
            directed: false,
        },
        ev_cap: BTreeMap::from([("n0".to_string(), 2), ("n1".to_string(), 2)]),
        transport_cost: BTreeMap::from([("ev0".to_string(), 0.05)]),
        initial_location: BTreeMap::from([("ev0".to_string(), "n0".to_string())]),
    }
}

/// Two connected load nodes, one vehicle, caps of two: every state sits
/// strictly inside the capacity constraint.
fn csp_interior() -> CspInstance64 {
    csp_base(2, vec!["n0", "n1"], vec!["n0", "n1"], vec![(0, 1, 1)], 3)
}

/// Two vehicles on a single node with capacity one: the cap binds.
fn csp_tight() -> CspInstance64 {
    let mut instance = csp_base(1, vec!["n0"], vec!["n0"], vec![], 3);
    let mut second = instance.v2g.fleet[0].clone();
    second.id = "ev1".into();
    instance.v2g.fleet.push(second);
    instance.ev_cap = BTreeMap::from([("n0".to_string(), 1)]);
    instance.transport_cost.insert("ev1".into(), 0.05);
    instance.initial_location.insert("ev1".into(), "n0".into());
    instance
}

/// Three vehicles against a capacity of two: the slack path proper.
fn csp_trio() -> CspInstance64 {
    let mut instance = csp_base(1, vec!["n0"], vec!["n0"], vec![], 3);
    for i in 1..3 {
        let mut veh = instance.v2g.fleet[0].clone();
        veh.id = format!("ev{i}");
        instance.v2g.fleet.push(veh.clone());
        instance.transport_cost.insert(veh.id.clone(), 0.05);
        instance.initial_location.insert(veh.id, "n0".into());
    }
    instance.ev_cap = BTreeMap::from([("n0".to_string(), 2)]);
    instance
}

/// Three steps, one load node, a second graph node reachable but
/// loadless: routing is available yet never worth the cost.
fn csp_three_steps() -> CspInstance64 {
    csp_base(3, vec!["n0"], vec!["n0", "n1"], vec![(0, 1, 1)], 3)
}

/// Three steps, two load nodes, two-step travel time: connecting at the
/// far node is only possible by staying off-grid first.
fn csp_slow_edge() -> CspInstance64 {
    let mut instance = csp_base(3, vec!["n0", "n1"], vec!["n0", "n1"], vec![(0, 1, 2)], 2);
    // make the far node valuable so routing decisions matter
    for t in 0..3 {
        instance.v2g.limits.crit_cost_per_kwh[t][1] = 8.0;
    }
    instance
}

fn criterion8_suite() -> Vec<CspInstance64> {
    vec![csp_interior(), csp_tight(), csp_three_steps(), csp_slow_edge()]
}

// ---------------------------------------------------------------------------
// criteria
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let family = verification_family();
    assert_eq!(family.len(), 50);
    let mut max_bits = 0;
    for (instance, levels, soc_levels) in &family {
        let (model, encodings, q, map) =
            transpiled(instance, *levels, *soc_levels, InequalityMode::SlackBits);
        assert!(q.num_bits() <= QUBO_BIT_CAP);
        max_bits = max_bits.max(q.num_bits());

        let ground = brute_force(&q).expect("brute force");
        let decoded = decode(&ground.best_bits, &map).expect("decode");
        let report = evaluate(&model, &decoded.assignment).expect("evaluate");
        assert!(
            report.feasible,
            "ground state decodes infeasible: {:?}",
            report.violated_constraints
        );

        let oracle = exact_discrete_reference(&model, &encodings).expect("reference");
        let ReferenceOutcome::Optimal { objective, .. } = oracle else {
            panic!("reference infeasible on a generated instance");
        };
        assert_eq!(
            report.objective, objective,
            "decoded ground-state objective differs from the oracle"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "criterion 1 took {elapsed:?}, budget is 60 s"
    );
    println!(
        "criterion 1 (oracle equivalence): PASS — 50/50 instances agree exactly, max {max_bits} bits, {:.2} s",
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_2_energy_identity() {
    let family = verification_family();
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    // ten transpiled models: six dispatch instances across both
    // inequality modes, plus four placement instances
    let mut targets: Vec<(Model64, evgrid_core::Qubo64, evgrid_core::qubo::VariableMap<f64>)> =
        Vec::new();
    for (i, (instance, levels, soc_levels)) in family.iter().take(6).enumerate() {
        let mode = if i % 2 == 0 {
            InequalityMode::SlackBits
        } else {
            InequalityMode::PaperVerbatim
        };
        let (model, _, q, map) = transpiled(instance, *levels, *soc_levels, mode);
        targets.push((model, q, map));
    }
    for instance in criterion8_suite() {
        let model = build_csp_model(&instance).expect("csp model");
        let encodings = EncodingSet64::for_model(&model, 2, 3).expect("encodings");
        let config =
            PenaltyConfig::dominant_for(&model, &encodings, InequalityMode::SlackBits).unwrap();
        let (q, map) = transpile(&model, config, &encodings).expect("transpile");
        targets.push((model, q, map));
    }
    assert_eq!(targets.len(), 10);

    for (model, q, map) in &targets {
        for _ in 0..100 {
            let bits: Vec<bool> = (0..q.num_bits()).map(|_| rng.random()).collect();
            let audit = penalty_audit(model, map, &bits).expect("audit");
            let energy = q.energy(&bits).expect("energy");
            let gap = audit.identity_gap(energy).abs();
            worst = worst.max(gap);
            assert!(
                gap < 1e-6,
                "identity gap {gap} on model {} ({} bits)",
                model.name,
                q.num_bits()
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
    println!(
        "criterion 2 (energy identity): PASS — 1000 bitstrings across 10 models, worst gap {worst:.2e}"
    );
}

#[test]
fn criterion_3_sa_quality() {
    let family = verification_family();
    let mut hits = 0usize;
    let mut runs = 0usize;
    let mut monotone = true;
    for (instance, levels, soc_levels) in &family {
        let (_, _, q, _) = transpiled(instance, *levels, *soc_levels, InequalityMode::SlackBits);
        let exact = brute_force(&q).expect("brute force");
        for seed in [1u64, 2u64] {
            let schedule = AnnealSchedule::default_for(&q, seed);
            let result = simulated_anneal(&q, &schedule).expect("anneal");
            runs += 1;
            if (result.best_energy - exact.best_energy).abs() < 1e-9 {
                hits += 1;
            }
            for trace in &result.energy_trace {
                if !trace.windows(2).all(|w| w[1] <= w[0]) {
                    monotone = false;
                }
            }
        }
    }
    assert!(monotone, "a best-energy trace increased");
    assert!(
        hits * 100 >= runs * 90,
        "sa reached the optimum on only {hits}/{runs} runs"
    );
    println!(
        "criterion 3 (sa quality): PASS — optimum on {hits}/{runs} runs, all traces monotone"
    );
}

#[test]
fn criterion_4_penalty_mode_contrast() {
    let instances = vec![csp_interior(), csp_tight(), csp_trio()];
    let mut contrast_shown = false;

    for (idx, instance) in instances.iter().enumerate() {
        let model = build_csp_model(instance).expect("csp model");
        let encodings = EncodingSet64::for_model(&model, 2, 3).expect("encodings");

        let slack_cfg =
            PenaltyConfig::dominant_for(&model, &encodings, InequalityMode::SlackBits).unwrap();
        let (slack_q, slack_map) = transpile(&model, slack_cfg, &encodings).unwrap();
        let slack_ground = brute_force(&slack_q).expect("slack brute force");
        let slack_decoded = decode(&slack_ground.best_bits, &slack_map).unwrap();
        let slack_report = evaluate(&model, &slack_decoded.assignment).unwrap();
        assert!(
            slack_report.feasible,
            "slack-mode ground state decodes infeasible on instance {idx}: {:?}",
            slack_report.violated_constraints
        );

        let verb_cfg =
            PenaltyConfig::dominant_for(&model, &encodings, InequalityMode::PaperVerbatim)
                .unwrap();
        let (verb_q, verb_map) = transpile(&model, verb_cfg, &encodings).unwrap();
        let verb_ground = brute_force(&verb_q).expect("verbatim brute force");
        let verb_decoded = decode(&verb_ground.best_bits, &verb_map).unwrap();
        let verb_report = evaluate(&model, &verb_decoded.assignment).unwrap();
        let verb_audit = penalty_audit(&model, &verb_map, &verb_ground.best_bits).unwrap();

        // interior penalization: a satisfied constraint carrying positive
        // penalty energy at the verbatim ground state
        let interior_penalized = verb_audit
            .constraints
            .iter()
            .any(|e| e.satisfied && e.penalty > 1e-9);
        let strictly_higher =
            verb_ground.best_energy > slack_ground.best_energy + 1e-9;
        if strictly_higher || !verb_report.feasible || interior_penalized {
            contrast_shown = true;
        }
    }
    assert!(
        contrast_shown,
        "verbatim mode never showed higher ground energy or interior penalization"
    );
    println!(
        "criterion 4 (penalty-mode contrast): PASS — slack decodes 100% feasible, verbatim gap demonstrated"
    );
}

#[test]
fn criterion_5_stochastic_linearity() {
    let base_csp = generate_csp(&GenerateParams {
        vehicles: 1,
        steps: 2,
        nodes: 3,
        crit_fraction: 0.67,
        levels: 2,
        soc_levels: 3,
        seed: 77,
    })
    .expect("generator");
    let mut base = base_csp.v2g.clone();
    base.objective_mode = ObjectiveMode::Weighted { w1: 0.4, w2: 0.6 };
    let config = PerturbationConfig {
        load_sigma: 0.3,
        gen_sigma: 0.2,
        edge_outage_prob: 0.0,
        vehicle_outage_prob: 0.0,
    };
    let set = {
        let mut set = sample_scenarios(&base_csp, &config, 5, 3).expect("scenarios");
        set.w1 = 0.4;
        set.w2 = 0.6;
        set
    };
    let model = build_stochastic_v2g(&base, &set).expect("stochastic model");

    // per-scenario deterministic models for the comparison side
    let scenario_models: Vec<Model64> = set
        .scenarios()
        .iter()
        .map(|s| {
            let mut materialized = apply_to_v2g(s, &base).unwrap();
            materialized.objective_mode = ObjectiveMode::Weighted { w1: 0.4, w2: 0.6 };
            build_weighted_model(&materialized).unwrap()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut assignment = evgrid_core::Assignment64::new();
        for var in model.variables() {
            let value = if var.is_fixed() {
                var.lower
            } else {
                match var.kind {
                    VarKind::Binary => {
                        if rng.random::<bool>() {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    VarKind::Continuous => rng.random_range(var.lower..=var.upper),
                }
            };
            assignment.set(var.name.clone(), value);
        }
        let stochastic = evaluate(&model, &assignment).unwrap().objective;
        let mut weighted_sum = 0.0;
        for (idx, (scenario, sub)) in
            set.scenarios().iter().zip(&scenario_models).enumerate()
        {
            let projected = project_scenario_assignment(&assignment, idx);
            weighted_sum +=
                scenario.probability * evaluate(sub, &projected).unwrap().objective;
        }
        let gap = (stochastic - weighted_sum).abs();
        worst = worst.max(gap);
        assert!(gap < 1e-9, "stochastic objective gap {gap}");
    }
    println!(
        "criterion 5 (stochastic linearity): PASS — 20 assignments on a 3-scenario model, worst gap {worst:.2e}"
    );
}

#[test]
fn criterion_6_mobility_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut plans_checked = 0usize;
    let mut instance_idx = 0u64;
    while plans_checked < 100 {
        let instance = generate_csp(&GenerateParams {
            vehicles: 1 + (instance_idx as usize % 2),
            steps: 3,
            nodes: 3 + (instance_idx as usize % 2),
            crit_fraction: 0.7,
            levels: 2,
            soc_levels: 2,
            seed: 9000 + instance_idx,
        })
        .expect("generator");
        instance_idx += 1;
        let model = build_csp_model(&instance).expect("model");
        let horizon = instance.horizon();

        for _ in 0..10 {
            if plans_checked == 100 {
                break;
            }
            // random plan: presence at a random location on ~60% of steps,
            // a few random traversal records
            let mut plan = RoutePlan::default();
            for veh in &instance.v2g.fleet {
                let mut presence = Vec::new();
                for t in 0..horizon {
                    if rng.random::<f64>() < 0.6 {
                        let loc = &instance.v2g.locations
                            [rng.random_range(0..instance.v2g.locations.len())];
                        presence.push((t, loc.clone()));
                    }
                }
                let mut traversals = Vec::new();
                for _ in 0..rng.random_range(0..3usize) {
                    if instance.graph.edges.is_empty() {
                        break;
                    }
                    let e = &instance.graph.edges
                        [rng.random_range(0..instance.graph.edges.len())];
                    let (from, to) = if rng.random::<bool>() {
                        (e.a.clone(), e.b.clone())
                    } else {
                        (e.b.clone(), e.a.clone())
                    };
                    traversals.push(TraversalRecord {
                        timestep: rng.random_range(0..horizon),
                        from,
                        to,
                    });
                }
                plan.presence.insert(veh.id.clone(), presence);
                plan.traversals.insert(veh.id.clone(), traversals);
            }

            let validator: BTreeSet<String> = validate_route_plan(&instance, &plan)
                .expect("validator")
                .violations
                .iter()
                .filter_map(|v| v.model_label())
                .collect();

            let assignment = route_plan_assignment(&model, &plan);
            let report = evaluate(&model, &assignment).expect("evaluate");
            let model_side: BTreeSet<String> = report
                .residuals
                .iter()
                .filter(|r| {
                    r.violated
                        && matches!(
                            r.class,
                            ConstraintClass::EvCapacity | ConstraintClass::Mobility
                        )
                })
                .map(|r| r.label.clone())
                .collect();

            assert_eq!(
                validator, model_side,
                "violation sets disagree on plan {plans_checked}"
            );
            plans_checked += 1;
        }
    }
    println!(
        "criterion 6 (mobility correctness): PASS — validator and model agree on 100 random plans"
    );
}

#[test]
fn criterion_7_soc_physics() {
    let mut rng = ChaCha8Rng::seed_from_u64(777);
    for case in 0..100 {
        let eta_ch = rng.random_range(0.5..0.99);
        let eta_dis = rng.random_range(0.5..0.99);
        let veh = VehicleSpec {
            id: format!("ev{case}"),
            max_charge_kw: 10.0,
            max_discharge_kw: 10.0,
            charge_efficiency: eta_ch,
            discharge_efficiency: eta_dis,
            soc_min_kwh: 1.0,
            soc_max_kwh: 1000.0,
            soc_initial_kwh: 500.0,
            reactive_ratio: 0.0,
            battery_cost_per_kwh: 0.0,
        };
        let steps = rng.random_range(1..5usize);
        let grid = TimeGrid {
            horizon_steps: steps + 1,
            step_hours: rng.random_range(0.25..2.0),
        };
        // charge for `steps` steps, then discharge exactly back to the
        // starting state of charge
        let p_ch = rng.random_range(0.5..5.0);
        let mut schedule: Vec<(f64, f64)> = vec![(p_ch, 0.0); steps];
        let p_dis = eta_ch * p_ch * eta_dis * steps as f64;
        schedule.push((0.0, p_dis));
        let series = simulate_soc(&veh, &grid, &schedule);
        let net = series.values.last().unwrap() - series.values[0];
        assert!(net.abs() < 1e-9, "round trip failed to close: {net}");
        let drawn = p_ch * steps as f64;
        assert!(
            p_dis < drawn,
            "delivered {p_dis} not below drawn {drawn} with eta {eta_ch}*{eta_dis}"
        );
    }

    // encoding round trip on every representable value
    for case in 0..50 {
        let p_max = 0.5 + case as f64 * 0.37;
        let levels = 2 + case % 7;
        let enc = make_power_encoding(p_max, levels).unwrap();
        for k in 0..enc.levels {
            assert_eq!(enc.level_of(enc.value_at(k), 1e-9), Some(k));
        }
        let veh = VehicleSpec {
            id: "ev".into(),
            max_charge_kw: 1.0,
            max_discharge_kw: 1.0,
            charge_efficiency: 1.0,
            discharge_efficiency: 1.0,
            soc_min_kwh: 1.0 + case as f64 * 0.1,
            soc_max_kwh: 3.0 + case as f64 * 0.21,
            soc_initial_kwh: 1.0 + case as f64 * 0.1,
            reactive_ratio: 0.0,
            battery_cost_per_kwh: 0.0,
        };
        let enc = make_soc_encoding(&veh, levels).unwrap();
        for k in 0..enc.levels {
            assert_eq!(enc.level_of(enc.value_at(k), 1e-9), Some(k));
        }
    }
    println!(
        "criterion 7 (soc physics): PASS — 100 lossy round trips, encode/decode identity on all representable values"
    );
}

#[test]
fn criterion_8_hybrid_sanity() {
    let suite = criterion8_suite();
    let mut matches = 0usize;
    let mut runs = 0usize;
    for (idx, instance) in suite.iter().enumerate() {
        let model = build_csp_model(instance).expect("model");
        let encodings = EncodingSet64::for_model(&model, 2, 3).expect("encodings");
        let oracle = exact_discrete_reference(&model, &encodings).expect("reference");
        let ReferenceOutcome::Optimal { objective, .. } = oracle else {
            panic!("suite instance {idx} infeasible");
        };
        for seed in 0..25u64 {
            let config = HybridConfig {
                seed,
                sweeps: 120,
                restarts: 3,
                max_passes: 8,
            };
            let solution = hybrid_solve(&model, &encodings, &config).expect("hybrid");
            runs += 1;
            assert!(
                solution.feasible,
                "hybrid returned an infeasible assignment on instance {idx} seed {seed}: {:?}",
                solution.report.violated_constraints
            );
            if (solution.objective - objective).abs() < 1e-9 {
                matches += 1;
            }
        }
    }
    assert_eq!(runs, 100);
    assert!(
        matches * 100 >= runs * 90,
        "hybrid matched the oracle on only {matches}/{runs} runs"
    );
    println!(
        "criterion 8 (hybrid sanity): PASS — oracle match on {matches}/{runs} runs, all feasible"
    );
}

#[test]
fn criterion_9_bench_reproducibility() {
    let fixture_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let config = load_config(fixture_dir.join("bench_config.json")).expect("config");

    let tmp = tempfile::tempdir().unwrap();
    let rows_a = run_benchmark(&config, &fixture_dir).expect("first run");
    let rows_b = run_benchmark(&config, &fixture_dir).expect("second run");
    let (ra, sa) = emit_results(&rows_a, tmp.path().join("a")).unwrap();
    let (rb, sb) = emit_results(&rows_b, tmp.path().join("b")).unwrap();

    let results_a = strip_wall_time(&std::fs::read_to_string(ra).unwrap());
    let results_b = strip_wall_time(&std::fs::read_to_string(rb).unwrap());
    assert_eq!(results_a, results_b, "results differ across reruns");
    assert_eq!(
        std::fs::read_to_string(sa).unwrap(),
        std::fs::read_to_string(sb).unwrap(),
        "summaries differ across reruns"
    );
    println!(
        "criterion 9 (bench reproducibility): PASS — identical tables across two runs ({} rows)",
        rows_a.len()
    );
}
