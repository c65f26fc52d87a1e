use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use delamid::adjoint::{compare_oracles, OracleComparisonOptions};
use delamid::identify::{gradient_check, random_parameters};
use delamid::io::{self, cached_model, emit_frames, emit_results, write_json, write_trajectory_csv};
use delamid::{run_identification, AdhesiveParams, Error, ExperimentConfig, ForwardModel, IdentificationReport};

#[derive(Parser)]
#[command(name = "delamid", version, about = "Adhesive parameter identification for quasistatic delamination")]
struct Cli {
    /// Cache for the assembled and reduced model (JSON); rebuilt when stale.
    #[arg(long, global = true, value_name = "PATH")]
    mesh_cache: Option<PathBuf>,
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Experiment configuration file, or the name of a bundled one (`desk`, `full`).
    #[arg(long, value_name = "FILE")]
    config: String,
}

#[derive(Subcommand)]
enum Command {
    /// Run the forward recursion and write the trajectory.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Per-node parameters (JSON); defaults to the planted distribution.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-phase identification on the configured data.
    Identify {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Phases of the configured plan to run, e.g. `1,2,3,4`.
        #[arg(long, value_delimiter = ',')]
        phases: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the adjoint subgradient with finite differences (CSV).
    GradCheck {
        #[command(flatten)]
        config: ConfigArg,
        /// Per-node parameters (JSON); defaults to a random point of the box.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Relative difference step; defaults to the configured one.
        #[arg(long)]
        step: Option<f64>,
        /// Output file; standard output if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// M-stationarity certificate at a parameter point (JSON).
    Stationarity {
        #[command(flatten)]
        config: ConfigArg,
        /// Per-node parameters (JSON).
        #[arg(long, conflicts_with = "report")]
        params: Option<PathBuf>,
        /// Identification report whose final parameters are checked.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the normal-cone formula against the sampling oracle.
    OracleNc {
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        steps: Vec<usize>,
        #[arg(long, default_value_t = 50)]
        bases: usize,
        #[arg(long, default_value_t = 200)]
        queries: usize,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Marks failures caused by the user's input.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<Usage>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_config() { 2 } else { 3 };
        }
    }
    3
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DELAMID_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Usage(format!("DELAMID_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    Ok(())
}

fn load(arg: &ConfigArg) -> Result<(ExperimentConfig, Option<PathBuf>)> {
    let path = Path::new(&arg.config);
    if !path.exists() {
        if let Some(cfg) = io::bundled(&arg.config) {
            return Ok((cfg, None));
        }
        return Err(Usage(format!("{}: no such file or bundled configuration", arg.config)).into());
    }
    let cfg = io::load_config(path).map_err(input_error)?;
    Ok((cfg, path.parent().map(Path::to_path_buf)))
}

/// Unreadable input files are the user's problem, not a numerical failure.
fn input_error(e: Error) -> anyhow::Error {
    match e {
        Error::Io { path, source } => Usage(format!("{path}: {source}")).into(),
        e => e.into(),
    }
}

fn read_input<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    io::read_json(path).map_err(input_error)
}

fn model(cfg: &ExperimentConfig, cache: Option<&Path>) -> Result<ForwardModel> {
    match cache {
        Some(p) => {
            let (m, status) = cached_model(cfg, p)?;
            log::info!("mesh cache {}: {status:?}", p.display());
            Ok(m)
        }
        None => Ok(cfg.build_model()?),
    }
}

fn read_params(path: &Path, m: usize) -> Result<AdhesiveParams> {
    let p: AdhesiveParams = read_input(path)?;
    if p.len() != m {
        return Err(Usage(format!("{}: {} nodes, the mesh has {m} contact nodes", path.display(), p.len())).into());
    }
    p.validate()?;
    Ok(p)
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let cache = cli.mesh_cache.as_deref();
    match cli.command {
        Command::Simulate { config, params, out } => {
            let (cfg, _) = load(&config)?;
            let model = model(&cfg, cache)?;
            let params = match params {
                Some(p) => read_params(&p, model.m())?,
                None => cfg.planted_params(),
            };
            let loading = cfg.build_loading(&model)?;
            let traj = delamid::simulate(&model, &params, &loading, &cfg.z0())?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            write_trajectory_csv(&out.join("trajectory.csv"), &model, &traj)?;
            if cfg.output.svg {
                emit_frames(&out, &model, &traj, &loading, cfg.output.magnification)?;
            }
            let broken = traj.z.last().map_or(0, |z| z.iter().filter(|v| **v == 0.0).count());
            println!("{} steps, {broken} of {} contact nodes fully delaminated", traj.steps(), model.m());
        }
        Command::Identify { config, seed, phases, out } => {
            let (mut cfg, base) = load(&config)?;
            if let Some(sel) = phases {
                let n = cfg.plan.phases.len();
                if sel.is_empty() || sel.iter().any(|p| *p == 0 || *p > n) || sel.windows(2).any(|w| w[0] >= w[1]) {
                    bail!(Usage(format!("--phases must be increasing numbers in 1..={n}")));
                }
                cfg.plan.phases = sel.iter().map(|p| cfg.plan.phases[p - 1].clone()).collect();
            }
            let seed = seed.unwrap_or(cfg.seed);
            let model = model(&cfg, cache)?;
            let problem = cfg.build_problem(model, base.as_deref())?;
            let report = run_identification(&problem, &cfg.bounds, &cfg.plan, seed)?;
            let planted = cfg.objective.data.is_none().then(|| cfg.planted_params());
            let plots = if cfg.output.svg { planted.as_ref() } else { None };
            emit_results(&report, &out, Some(&problem.model), plots)?;
            if let Some(p) = &report.final_params {
                let traj = problem.simulate(p)?;
                write_trajectory_csv(&out.join("trajectory.csv"), &problem.model, &traj)?;
                if cfg.output.svg {
                    emit_frames(&out, &problem.model, &traj, &problem.loading, cfg.output.magnification)?;
                }
            }
            summarize(&report);
        }
        Command::GradCheck { config, params, seed, step, out } => {
            let (cfg, base) = load(&config)?;
            let model = model(&cfg, cache)?;
            let problem = cfg.build_problem(model, base.as_deref())?;
            let params = match params {
                Some(p) => read_params(&p, problem.m())?,
                None => random_parameters(problem.m(), &cfg.bounds, seed),
            };
            let check = gradient_check(&problem, &params, step.unwrap_or(cfg.tolerances.fd_step))?;
            write_or_print(out.as_deref(), &check.to_csv())?;
            eprintln!(
                "max relative error {:.3e}; strictly complementary: {}; stable activity: {}",
                check.max_relative_error(),
                check.strictly_complementary,
                check.stable_activity
            );
        }
        Command::Stationarity { config, params, report, tol, out } => {
            let (cfg, base) = load(&config)?;
            let model = model(&cfg, cache)?;
            let problem = cfg.build_problem(model, base.as_deref())?;
            let params = match (params, report) {
                (Some(p), _) => read_params(&p, problem.m())?,
                (None, Some(r)) => {
                    let rep: IdentificationReport = read_input(&r)?;
                    rep.final_params.ok_or_else(|| Usage(format!("{}: report has no final parameters", r.display())))?
                }
                (None, None) => cfg.planted_params(),
            };
            let st = problem.check_stationarity(&params, &cfg.bounds, tol.unwrap_or(cfg.tolerances.stationarity))?;
            match &out {
                Some(p) => write_json(p, &st)?,
                None => println!("{}", serde_json::to_string_pretty(&st)?),
            }
            eprintln!("stationary: {} (residual {:.3e}, tol {:.1e})", st.stationary, st.residual, st.tol);
        }
        Command::OracleNc { steps, bases, queries, tol, seed, out } => {
            let mut results = Vec::new();
            for k in steps {
                if k == 0 {
                    bail!(Usage("--steps entries must be positive".into()));
                }
                let opts = OracleComparisonOptions { steps: k, base_points: bases, queries, tol, seed: seed + k as u64, ..Default::default() };
                let r = compare_oracles(&opts)?;
                eprintln!(
                    "K={k}: {} queries, {} marginal, agreement {:.4}",
                    r.queries,
                    r.marginal,
                    r.agreement_rate()
                );
                results.push(r);
            }
            write_or_print(out.as_deref(), &(serde_json::to_string_pretty(&results)? + "\n"))?;
        }
    }
    Ok(())
}

fn summarize(report: &IdentificationReport) {
    for p in &report.phases {
        println!(
            "phase {} ({}, {:?}): {:.6e} -> {:.6e} after {} iterations [{:?}]",
            p.phase, p.grouping, p.algorithm, p.start_objective, p.end_objective, p.iterations, p.stop
        );
    }
    if let (Some(a), Some(b)) = (report.initial_objective, report.final_objective) {
        println!("objective {a:.6e} -> {b:.6e}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
