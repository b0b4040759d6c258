//! Benchmark orchestration: build, transpile, solve, decode, audit, and
//! emit plot-ready tables.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use evgrid_core::model::evaluate;
use evgrid_core::qubo::{decode, transpile, InequalityMode, PenaltyConfig};
use evgrid_core::solve::{
    brute_force, exact_discrete_reference, greedy_descent, hybrid_solve, simulated_anneal,
    AnnealSchedule, HybridConfig, ReferenceOutcome,
};
use evgrid_core::{EncodingSet64, Model64};

use crate::generate::{generate_csp, generate_v2g, GenerateParams};
use crate::schema::{load_instance, InstanceFile, InstanceKind};
use crate::{build_model, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    V2g,
    Csp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSpec {
    pub kind: GenKind,
    #[serde(flatten)]
    pub params: GenerateParams,
}

/// Where a benchmark instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Instance file path, relative to the config file.
    Path(String),
    Generate(GenerateSpec),
}

fn default_sweeps() -> usize {
    200
}
fn default_restarts() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum SolverSpec {
    #[serde(rename = "bruteforce")]
    BruteForce,
    #[serde(rename = "sa")]
    SimulatedAnnealing {
        #[serde(default = "default_sweeps")]
        sweeps: usize,
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
    Greedy,
    Hybrid {
        #[serde(default = "default_sweeps")]
        sweeps: usize,
        #[serde(default = "default_restarts")]
        restarts: usize,
    },
}

impl SolverSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SolverSpec::BruteForce => "bruteforce",
            SolverSpec::SimulatedAnnealing { .. } => "sa",
            SolverSpec::Greedy => "greedy",
            SolverSpec::Hybrid { .. } => "hybrid",
        }
    }
}

fn default_levels() -> usize {
    2
}
fn default_soc_levels() -> usize {
    3
}
fn default_penalty_mode() -> InequalityMode {
    InequalityMode::SlackBits
}
fn default_lambda_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub schema_version: u32,
    pub instances: Vec<InstanceSource>,
    pub solvers: Vec<SolverSpec>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_soc_levels")]
    pub soc_levels: usize,
    #[serde(default = "default_penalty_mode")]
    pub penalty_mode: InequalityMode,
    #[serde(default = "default_lambda_scale")]
    pub lambda_scale: f64,
    #[serde(default)]
    pub out_dir: Option<String>,
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != crate::schema::SCHEMA_VERSION {
            return Err(CliError::Parse(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.instances.is_empty() {
            return Err(CliError::Invariant("config lists no instances".into()));
        }
        if self.solvers.is_empty() {
            return Err(CliError::Invariant("config lists no solvers".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Invariant("config lists no seeds".into()));
        }
        Ok(())
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<BenchmarkConfig, CliError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let config: BenchmarkConfig = serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    config.validate()?;
    Ok(config)
}

/// One `(instance, solver, seed)` outcome. Optional fields stay empty
/// when a stage failed; the failure lands in `error` instead of
/// aborting the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub instance: String,
    pub solver: String,
    pub seed: u64,
    pub bits: Option<usize>,
    pub energy: Option<f64>,
    pub objective: Option<f64>,
    pub feasible: Option<bool>,
    pub gap: Option<f64>,
    pub error: Option<String>,
    pub wall_ms: f64,
}

struct PreparedInstance {
    id: String,
    model: Model64,
    encodings: EncodingSet64,
}

fn prepare(
    source: &InstanceSource,
    base_dir: &Path,
    levels: usize,
    soc_levels: usize,
) -> Result<PreparedInstance, CliError> {
    let (id, file) = match source {
        InstanceSource::Path(p) => {
            let path = base_dir.join(p);
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.clone());
            (id, load_instance(&path)?)
        }
        InstanceSource::Generate(spec) => {
            let instance = match spec.kind {
                GenKind::V2g => InstanceKind::V2g(generate_v2g(&spec.params)?),
                GenKind::Csp => InstanceKind::Csp(generate_csp(&spec.params)?),
            };
            let id = spec.params.instance_id(match spec.kind {
                GenKind::V2g => "v2g",
                GenKind::Csp => "csp",
            });
            (id, InstanceFile::new(instance))
        }
    };
    let model = build_model(&file)?;
    let encodings = EncodingSet64::for_model(&model, levels, soc_levels)
        .map_err(CliError::invariant)?;
    Ok(PreparedInstance {
        id,
        model,
        encodings,
    })
}

fn run_solver(
    prepared: &PreparedInstance,
    solver: &SolverSpec,
    seed: u64,
    penalty_mode: InequalityMode,
    lambda_scale: f64,
    oracle: Option<f64>,
) -> Result<(Option<usize>, Option<f64>, Option<f64>, Option<bool>, Option<f64>), CliError> {
    let model = &prepared.model;
    let encodings = &prepared.encodings;

    if let SolverSpec::Hybrid { sweeps, restarts } = solver {
        let config = HybridConfig {
            seed,
            sweeps: *sweeps,
            restarts: *restarts,
            max_passes: 8,
        };
        let solution = hybrid_solve(model, encodings, &config).map_err(CliError::from)?;
        let gap = gap_against(oracle, Some(solution.objective), solution.feasible);
        return Ok((
            None,
            None,
            Some(solution.objective),
            Some(solution.feasible),
            gap,
        ));
    }

    let penalty = PenaltyConfig::dominant_for(model, encodings, penalty_mode)
        .map_err(CliError::from)?
        .with_scale(lambda_scale);
    let (q, map) = transpile(model, penalty, encodings).map_err(CliError::from)?;
    let bits = q.num_bits();
    let result = match solver {
        SolverSpec::BruteForce => brute_force(&q).map_err(CliError::from)?,
        SolverSpec::SimulatedAnnealing { sweeps, restarts } => {
            let mut schedule = AnnealSchedule::default_for(&q, seed);
            schedule.sweeps = *sweeps;
            schedule.restarts = *restarts;
            simulated_anneal(&q, &schedule).map_err(CliError::from)?
        }
        SolverSpec::Greedy => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let start: Vec<bool> = (0..bits).map(|_| rng.random()).collect();
            greedy_descent(&q, &start).map_err(CliError::from)?
        }
        SolverSpec::Hybrid { .. } => unreachable!("handled above"),
    };
    let decoded = decode(&result.best_bits, &map).map_err(CliError::from)?;
    let report = evaluate(model, &decoded.assignment).map_err(CliError::from)?;
    let gap = gap_against(oracle, Some(report.objective), report.feasible);
    Ok((
        Some(bits),
        Some(result.best_energy),
        Some(report.objective),
        Some(report.feasible),
        gap,
    ))
}

fn gap_against(oracle: Option<f64>, objective: Option<f64>, feasible: bool) -> Option<f64> {
    match (oracle, objective) {
        (Some(o), Some(v)) if feasible => {
            let gap = v - o;
            Some(if gap.abs() < 1e-9 { 0.0 } else { gap })
        }
        _ => None,
    }
}

/// Runs the full sweep. Rows come back in canonical
/// `(instance, solver, seed)` order regardless of execution details and
/// are deterministic for a fixed config, wall clock aside.
pub fn run_benchmark(
    config: &BenchmarkConfig,
    base_dir: &Path,
) -> Result<Vec<ResultRow>, CliError> {
    config.validate()?;
    let mut rows = Vec::new();
    for source in &config.instances {
        let prepared = prepare(source, base_dir, config.levels, config.soc_levels)?;
        // the constrained-space oracle fills the optimality gap when the
        // instance is small enough to enumerate
        let oracle = match exact_discrete_reference(&prepared.model, &prepared.encodings) {
            Ok(ReferenceOutcome::Optimal { objective, .. }) => Some(objective),
            _ => None,
        };
        for solver in &config.solvers {
            for &seed in &config.seeds {
                let start = Instant::now();
                let outcome = run_solver(
                    &prepared,
                    solver,
                    seed,
                    config.penalty_mode,
                    config.lambda_scale,
                    oracle,
                );
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                let row = match outcome {
                    Ok((bits, energy, objective, feasible, gap)) => ResultRow {
                        instance: prepared.id.clone(),
                        solver: solver.name().to_string(),
                        seed,
                        bits,
                        energy,
                        objective,
                        feasible,
                        gap,
                        error: None,
                        wall_ms,
                    },
                    Err(e) => ResultRow {
                        instance: prepared.id.clone(),
                        solver: solver.name().to_string(),
                        seed,
                        bits: None,
                        energy: None,
                        objective: None,
                        feasible: None,
                        gap: None,
                        error: Some(e.to_string()),
                        wall_ms,
                    },
                };
                rows.push(row);
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.instance, &a.solver, a.seed).cmp(&(&b.instance, &b.solver, b.seed))
    });
    Ok(rows)
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub const RESULTS_HEADER: &str =
    "instance,solver,seed,bits,energy,objective,feasible,gap,error,wall_ms";

/// Writes `results.csv` (fixed column order, wall time last) and
/// `summary.csv` (per-solver feasibility rate and mean gap).
pub fn emit_results(
    rows: &[ResultRow],
    dir: impl AsRef<Path>,
) -> Result<(PathBuf, PathBuf), CliError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;

    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.instance,
            r.solver,
            r.seed,
            r.bits.map(|b| b.to_string()).unwrap_or_default(),
            fmt_opt_f64(r.energy),
            fmt_opt_f64(r.objective),
            r.feasible.map(|f| f.to_string()).unwrap_or_default(),
            fmt_opt_f64(r.gap),
            r.error.as_deref().unwrap_or("").replace(',', ";"),
            fmt_f64(r.wall_ms),
        ));
    }
    let results_path = dir.join("results.csv");
    std::fs::write(&results_path, out)
        .map_err(|e| CliError::Io(format!("{}: {e}", results_path.display())))?;

    let mut solvers: Vec<&str> = rows.iter().map(|r| r.solver.as_str()).collect();
    solvers.sort_unstable();
    solvers.dedup();
    let mut summary = String::from("solver,rows,errors,feasible_rate,mean_gap\n");
    for solver in solvers {
        let of_solver: Vec<&ResultRow> = rows.iter().filter(|r| r.solver == solver).collect();
        let errors = of_solver.iter().filter(|r| r.error.is_some()).count();
        let with_feasible: Vec<bool> =
            of_solver.iter().filter_map(|r| r.feasible).collect();
        let feasible_rate = if with_feasible.is_empty() {
            String::new()
        } else {
            let rate = with_feasible.iter().filter(|&&f| f).count() as f64
                / with_feasible.len() as f64;
            fmt_f64(rate)
        };
        let gaps: Vec<f64> = of_solver.iter().filter_map(|r| r.gap).collect();
        let mean_gap = if gaps.is_empty() {
            String::new()
        } else {
            fmt_f64(gaps.iter().sum::<f64>() / gaps.len() as f64)
        };
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            solver,
            of_solver.len(),
            errors,
            feasible_rate,
            mean_gap
        ));
    }
    let summary_path = dir.join("summary.csv");
    std::fs::write(&summary_path, summary)
        .map_err(|e| CliError::Io(format!("{}: {e}", summary_path.display())))?;
    Ok((results_path, summary_path))
}

/// The results table with the wall-time column stripped — the
/// determinism-comparable content.
pub fn strip_wall_time(csv: &str) -> String {
    csv.lines()
        .map(|line| match line.rfind(',') {
            Some(idx) => &line[..idx],
            None => line,
        })
        .collect::<Vec<_>>()
        .join("\n")
}
