//! `evgrid` — build, transpile, solve, and benchmark resilience
//! dispatch and placement instances.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use evgrid_cli::bench::{load_config, run_benchmark, emit_results};
use evgrid_cli::generate::{generate_csp, generate_v2g, GenerateParams};
use evgrid_cli::schema::{
    load_assignment, load_instance, save_assignment, save_instance, InstanceFile, InstanceKind,
};
use evgrid_cli::{build_model, CliError};
use evgrid_core::model::evaluate;
use evgrid_core::qubo::{decode, penalty_audit, transpile, InequalityMode, PenaltyConfig};
use evgrid_core::solve::{
    brute_force, greedy_descent, hybrid_solve, simulated_anneal, AnnealSchedule, HybridConfig,
};
use evgrid_core::EncodingSet64;

#[derive(Parser)]
#[command(name = "evgrid", version, about = "V2G dispatch and mobile charging placement toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    V2g,
    Csp,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Bruteforce,
    Sa,
    Greedy,
    Hybrid,
}

#[derive(Clone, Copy, ValueEnum)]
enum PenaltyModeArg {
    SlackBits,
    PaperVerbatim,
}

impl From<PenaltyModeArg> for InequalityMode {
    fn from(m: PenaltyModeArg) -> Self {
        match m {
            PenaltyModeArg::SlackBits => InequalityMode::SlackBits,
            PenaltyModeArg::PaperVerbatim => InequalityMode::PaperVerbatim,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct DiscretizationArgs {
    /// Power discretization levels (K).
    #[arg(long = "levels", default_value_t = 2)]
    levels: usize,
    /// State-of-charge discretization levels.
    #[arg(long = "soc-levels", default_value_t = 3)]
    soc_levels: usize,
    /// Inequality penalty handling.
    #[arg(long = "penalty-mode", value_enum, default_value = "slack-bits")]
    penalty_mode: PenaltyModeArg,
    /// Multiplier on the dominance-bound penalty weights.
    #[arg(long = "lambda-scale", default_value_t = 1.0)]
    lambda_scale: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a deterministic instance file.
    Generate {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long, default_value_t = 1)]
        vehicles: usize,
        #[arg(long, default_value_t = 2)]
        steps: usize,
        /// Transport graph nodes (placement instances).
        #[arg(long, default_value_t = 3)]
        nodes: usize,
        /// Fraction of nodes carrying critical load.
        #[arg(long, default_value_t = 0.67)]
        crit_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        disc: DiscretizationArgs,
        /// Output directory.
        #[arg(long = "out", default_value = ".")]
        out: PathBuf,
    },
    /// Build a model and print its deterministic dump.
    Build {
        instance: PathBuf,
        /// Write the dump here instead of stdout.
        #[arg(long = "out")]
        out: Option<PathBuf>,
    },
    /// Translate an instance to a QUBO coordinate-list file.
    Transpile {
        instance: PathBuf,
        #[command(flatten)]
        disc: DiscretizationArgs,
        #[arg(long = "out", default_value = ".")]
        out: PathBuf,
    },
    /// Solve an instance end to end.
    Solve {
        instance: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        sweeps: usize,
        #[arg(long, default_value_t = 8)]
        restarts: usize,
        #[command(flatten)]
        disc: DiscretizationArgs,
        /// Write solution files into this directory.
        #[arg(long = "out")]
        out: Option<PathBuf>,
    },
    /// Run a benchmark sweep from a config file.
    Bench {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long = "out")]
        out: Option<PathBuf>,
    },
    /// Feasibility audit of an assignment file against an instance.
    Verify {
        instance: PathBuf,
        assignment: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate {
            kind,
            vehicles,
            steps,
            nodes,
            crit_fraction,
            seed,
            disc,
            out,
        } => {
            let params = GenerateParams {
                vehicles,
                steps,
                nodes,
                crit_fraction,
                levels: disc.levels,
                soc_levels: disc.soc_levels,
                seed,
            };
            let (id, file) = match kind {
                KindArg::V2g => (
                    params.instance_id("v2g"),
                    InstanceFile::new(InstanceKind::V2g(generate_v2g(&params)?)),
                ),
                KindArg::Csp => (
                    params.instance_id("csp"),
                    InstanceFile::new(InstanceKind::Csp(generate_csp(&params)?)),
                ),
            };
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            let path = out.join(format!("{id}.instance"));
            save_instance(&file, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Build { instance, out } => {
            let file = load_instance(&instance)?;
            let model = build_model(&file)?;
            let dump = model.dump();
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)
                        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                    let path = dir.join(format!("{}.model.txt", stem(&instance)));
                    std::fs::write(&path, dump)
                        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
                    println!("wrote {}", path.display());
                }
                None => print!("{dump}"),
            }
            Ok(())
        }
        Command::Transpile {
            instance,
            disc,
            out,
        } => {
            let file = load_instance(&instance)?;
            let model = build_model(&file)?;
            let encodings = EncodingSet64::for_model(&model, disc.levels, disc.soc_levels)
                .map_err(CliError::from)?;
            let penalty =
                PenaltyConfig::dominant_for(&model, &encodings, disc.penalty_mode.into())
                    .map_err(CliError::from)?
                    .with_scale(disc.lambda_scale);
            let (q, map) = transpile(&model, penalty, &encodings).map_err(CliError::from)?;
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            let path = out.join(format!("{}.qubo", stem(&instance)));
            std::fs::write(&path, q.export_coordinate())
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            println!(
                "wrote {} ({} bits, {} of them slack, {} terms)",
                path.display(),
                q.num_bits(),
                map.num_slack_bits(),
                q.num_terms()
            );
            Ok(())
        }
        Command::Solve {
            instance,
            method,
            seed,
            sweeps,
            restarts,
            disc,
            out,
        } => {
            let file = load_instance(&instance)?;
            let model = build_model(&file)?;
            let encodings = EncodingSet64::for_model(&model, disc.levels, disc.soc_levels)
                .map_err(CliError::from)?;

            let (assignment, objective, feasible, energy) = match method {
                MethodArg::Hybrid => {
                    let config = HybridConfig {
                        seed,
                        sweeps,
                        restarts,
                        max_passes: 8,
                    };
                    let solution =
                        hybrid_solve(&model, &encodings, &config).map_err(CliError::from)?;
                    (
                        solution.assignment,
                        solution.objective,
                        solution.feasible,
                        None,
                    )
                }
                _ => {
                    let penalty = PenaltyConfig::dominant_for(
                        &model,
                        &encodings,
                        disc.penalty_mode.into(),
                    )
                    .map_err(CliError::from)?
                    .with_scale(disc.lambda_scale);
                    let (q, map) =
                        transpile(&model, penalty, &encodings).map_err(CliError::from)?;
                    let result = match method {
                        MethodArg::Bruteforce => brute_force(&q).map_err(CliError::from)?,
                        MethodArg::Sa => {
                            let mut schedule = AnnealSchedule::default_for(&q, seed);
                            schedule.sweeps = sweeps;
                            schedule.restarts = restarts;
                            simulated_anneal(&q, &schedule).map_err(CliError::from)?
                        }
                        MethodArg::Greedy => {
                            use rand::{Rng, SeedableRng};
                            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                            let start: Vec<bool> =
                                (0..q.num_bits()).map(|_| rng.random()).collect();
                            greedy_descent(&q, &start).map_err(CliError::from)?
                        }
                        MethodArg::Hybrid => unreachable!(),
                    };
                    let audit =
                        penalty_audit(&model, &map, &result.best_bits).map_err(CliError::from)?;
                    let decoded = decode(&result.best_bits, &map).map_err(CliError::from)?;
                    let report = evaluate(&model, &decoded.assignment).map_err(CliError::from)?;
                    println!(
                        "qubo bits {} energy {} penalty {}",
                        q.num_bits(),
                        result.best_energy,
                        audit.total_penalty
                    );
                    (
                        decoded.assignment,
                        report.objective,
                        report.feasible,
                        Some(result.best_energy),
                    )
                }
            };
            println!(
                "objective {objective} feasible {feasible}{}",
                energy
                    .map(|e| format!(" energy {e}"))
                    .unwrap_or_default()
            );
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)
                    .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
                let path = dir.join(format!("{}.solution.json", stem(&instance)));
                save_assignment(&assignment, &path)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Bench { config, out } => {
            let parsed = load_config(&config)?;
            let base_dir = config
                .parent()
                .filter(|p| !p.as_os_str().is_empty())
                .unwrap_or(Path::new("."))
                .to_path_buf();
            let rows = run_benchmark(&parsed, &base_dir)?;
            let out_dir = out
                .or_else(|| parsed.out_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("bench_out"));
            let (results, summary) = emit_results(&rows, &out_dir)?;
            println!(
                "wrote {} and {} ({} rows)",
                results.display(),
                summary.display(),
                rows.len()
            );
            Ok(())
        }
        Command::Verify {
            instance,
            assignment,
        } => {
            let file = load_instance(&instance)?;
            let model = build_model(&file)?;
            let a = load_assignment(&assignment)?;
            let report = evaluate(&model, &a).map_err(CliError::from)?;
            println!(
                "objective {} feasible {}",
                report.objective, report.feasible
            );
            for v in &report.violated_constraints {
                println!("violated {v}");
            }
            for (name, over) in &report.bound_violations {
                println!("bound {name} overshoot {over}");
            }
            for (a, b) in &report.exclusion_violations {
                println!("exclusion {a} * {b} != 0");
            }
            Ok(())
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}
