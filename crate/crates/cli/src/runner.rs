//! Experiment execution: the (algorithm × seed) grid, trace CSVs, the
//! reference cache, and the metadata report.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sscn_core::oracle::RegularizerSpec;
use sscn_core::rng::RNG_FAMILY;
use sscn_core::sketch::SamplerSpec;
use sscn_core::solver::{self, Reference, RunConfig, Termination, TraceRecord};
use sscn_core::theory::{self, ConstantsReport, ZetaReport};

use crate::config::{self, CliError, Problem, ZetaRequest};

/// Column layout of every trace CSV.
pub const TRACE_HEADER: &str = "k,epochs,F,gap,grad_norm,M_used,elapsed_s";

/// File name of the cached high-accuracy solution inside the output dir.
pub const REFERENCE_FILE: &str = "reference.json";

/// Fixed seed for the ζ estimate so metadata is reproducible run to run.
const ZETA_SAMPLER_SEED: u64 = 0x5eed_2e7a;

/// Executes every configured (algorithm × seed) pair.
pub fn cmd_run(config_path: &Path, output_override: Option<PathBuf>) -> Result<(), CliError> {
    let config = config::load(config_path)?;
    let output_dir = output_override.unwrap_or_else(|| config.output_dir.clone());
    let problem = config::build_problem(&config)?;

    // The table feeds `estimated` weights and the metadata echo. It is
    // unavailable at very large dimension; runs that need it then fail with
    // a config error while plain runs proceed without the echo.
    let constants = theory::estimate_constants(&problem.oracle).ok();

    let reference = load_reference(&output_dir, &problem)?;

    // Resolve and validate every run up front so a typo in the last
    // algorithm entry cannot waste a long sweep.
    let mut jobs = Vec::new();
    for (index, spec) in config.algorithms.iter().enumerate() {
        let label = spec.display_label();
        for &seed in &config.seeds {
            let run_config = spec.to_run_config(seed, constants.as_ref())?;
            run_config.validate(&problem.oracle).map_err(|e| {
                CliError::Config(format!("algorithms[{index}] ({label}): {e}"))
            })?;
            jobs.push(Job {
                index,
                seed,
                file: format!("{index:02}_{label}_seed{seed}.csv", ),
                label: label.clone(),
                run_config,
            });
        }
    }
    let total = jobs.len();

    fs::create_dir_all(&output_dir).map_err(io_failure)?;

    let zeta = match &config.zeta {
        Some(request) => Some(compute_zeta_report(&problem, request)?),
        None => None,
    };

    let queue: Mutex<VecDeque<Job>> = Mutex::new(jobs.into());
    let outcomes: Mutex<Vec<(Job, Result<RunSummary, CliError>)>> = Mutex::new(Vec::new());
    let workers = config.parallel.min(total).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().pop_front();
                let Some(job) = job else { break };
                let outcome = execute_job(&problem, reference.as_ref(), &output_dir, &job);
                outcomes.lock().unwrap().push((job, outcome));
            });
        }
    });

    let mut outcomes = outcomes.into_inner().unwrap();
    outcomes.sort_by_key(|(job, _)| (job.index, job.seed));

    let mut summaries = Vec::new();
    let mut failures = Vec::new();
    for (job, outcome) in outcomes {
        match outcome {
            Ok(summary) => {
                let gap = match summary.final_gap {
                    Some(g) => format!(", gap {g:.3e}"),
                    None => String::new(),
                };
                println!(
                    "{}: {} after {} iterations, F {:.9e}{gap}",
                    summary.file,
                    summary.termination.as_str(),
                    summary.iterations,
                    summary.final_f,
                );
                summaries.push(summary);
            }
            Err(e) => failures.push(format!("{} seed {}: {e}", job.label, job.seed)),
        }
    }

    let metadata = Metadata {
        version: concat!(env!("CARGO_PKG_VERSION"), "+", env!("BUILD_GIT_HASH")),
        rng_family: RNG_FAMILY,
        dataset: &problem.dataset_summary,
        objective: problem.oracle.kind_name(),
        dim: problem.oracle.dim(),
        num_residuals: problem.oracle.num_residuals(),
        regularizer: problem.oracle.regularizer(),
        normalize: config.normalize,
        parallel: config.parallel,
        seeds: &config.seeds,
        reference_f_star: reference.as_ref().map(|r| r.f_star),
        constants: constants.as_ref(),
        zeta: zeta.as_ref(),
        warnings: &problem.warnings,
        runs: &summaries,
        failures: &failures,
    };
    let path = output_dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&metadata)
        .map_err(|e| CliError::Failure(format!("cannot serialize metadata: {e}")))?;
    fs::write(&path, text).map_err(io_failure)?;
    println!("metadata: {}", path.display());

    if let Some(first) = failures.first() {
        return Err(CliError::Failure(format!(
            "{} of {total} runs failed; first: {first}",
            failures.len()
        )));
    }
    Ok(())
}

/// Minimizes the configured objective to high accuracy and caches the result
/// next to the traces so later runs gain a gap column.
pub fn cmd_reference(config_path: &Path, output_override: Option<PathBuf>) -> Result<(), CliError> {
    let config = config::load(config_path)?;
    let output_dir = output_override.unwrap_or_else(|| config.output_dir.clone());
    let problem = config::build_problem(&config)?;
    let settings = config.reference.clone().unwrap_or_default();
    let solve =
        solver::reference_solve(&problem.oracle, problem.x0.clone(), settings.tol, settings.max_outer)?;
    if !solve.converged {
        return Err(CliError::Failure(format!(
            "reference solve stalled at stationarity {:.3e} after {} iterations (tol {:.1e}); \
             raise reference.max_outer or loosen reference.tol",
            solve.stationarity, solve.iterations, settings.tol
        )));
    }
    fs::create_dir_all(&output_dir).map_err(io_failure)?;
    let file = ReferenceFile {
        f_star: solve.f_star,
        x_star: solve.x.to_vec(),
        stationarity: solve.stationarity,
        iterations: solve.iterations,
        converged: solve.converged,
    };
    let path = output_dir.join(REFERENCE_FILE);
    let text = serde_json::to_string_pretty(&file)
        .map_err(|e| CliError::Failure(format!("cannot serialize reference: {e}")))?;
    fs::write(&path, text).map_err(io_failure)?;
    println!(
        "reference F* = {} (stationarity {:.3e}, {} iterations) cached at {}",
        file.f_star,
        file.stationarity,
        file.iterations,
        path.display()
    );
    Ok(())
}

/// On-disk form of the cached reference solution.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub f_star: f64,
    pub x_star: Vec<f64>,
    pub stationarity: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Job {
    index: usize,
    seed: u64,
    file: String,
    label: String,
    run_config: RunConfig,
}

/// Per-run entry in the metadata report.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub file: String,
    pub algorithm: String,
    pub label: String,
    pub seed: u64,
    pub termination: Termination,
    pub iterations: usize,
    pub final_f: f64,
    pub final_gap: Option<f64>,
    pub m_final: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Metadata<'a> {
    version: &'static str,
    rng_family: &'static str,
    dataset: &'a str,
    objective: &'static str,
    dim: usize,
    num_residuals: usize,
    regularizer: &'a RegularizerSpec,
    normalize: bool,
    parallel: usize,
    seeds: &'a [u64],
    reference_f_star: Option<f64>,
    constants: Option<&'a ConstantsReport>,
    zeta: Option<&'a ZetaReport>,
    warnings: &'a [String],
    runs: &'a [RunSummary],
    failures: &'a [String],
}

fn execute_job(
    problem: &Problem,
    reference: Option<&Reference>,
    output_dir: &Path,
    job: &Job,
) -> Result<RunSummary, CliError> {
    let result = solver::run(&problem.oracle, problem.x0.clone(), &job.run_config, reference)?;
    write_trace(&output_dir.join(&job.file), &result.trace)?;
    Ok(RunSummary {
        file: job.file.clone(),
        algorithm: job.run_config.algorithm.as_str().to_string(),
        label: job.label.clone(),
        seed: job.seed,
        termination: result.termination,
        iterations: result.final_state.iteration,
        final_f: result.final_state.value(),
        final_gap: result.trace.last().and_then(|r| r.gap),
        m_final: result.m_final,
        notes: result.notes,
    })
}

/// Writes one trace CSV. Floats use the shortest representation that parses
/// back to the same value, so a rerun with the same config reproduces every
/// column but `elapsed_s` bit for bit.
fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), CliError> {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for record in trace {
        let _ = write!(out, "{},{},{},", record.k, record.epochs, record.f);
        if let Some(gap) = record.gap {
            let _ = write!(out, "{gap}");
        }
        let _ = writeln!(out, ",{},{},{}", record.grad_norm, record.m_used, record.elapsed_s);
    }
    fs::write(path, out).map_err(io_failure)
}

/// Loads the cached reference if one exists; otherwise falls back to the
/// generator-certified minimizer when the problem carries one.
fn load_reference(output_dir: &Path, problem: &Problem) -> Result<Option<Reference>, CliError> {
    let path = output_dir.join(REFERENCE_FILE);
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(io_failure)?;
        let file: ReferenceFile = serde_json::from_str(&text).map_err(|e| {
            CliError::Failure(format!("{} is not a valid reference cache: {e}", path.display()))
        })?;
        if file.x_star.len() != problem.oracle.dim() {
            return Err(CliError::Failure(format!(
                "{}: cached minimizer has dimension {}, the problem has {}; rerun the \
                 reference command",
                path.display(),
                file.x_star.len(),
                problem.oracle.dim()
            )));
        }
        return Ok(Some(Reference {
            f_star: file.f_star,
            x_star: Some(Array1::from_vec(file.x_star)),
        }));
    }
    if let Some(x_star) = &problem.known_solution {
        return Ok(Some(Reference {
            f_star: problem.oracle.value_at(x_star),
            x_star: Some(x_star.clone()),
        }));
    }
    Ok(None)
}

fn compute_zeta_report(problem: &Problem, request: &ZetaRequest) -> Result<ZetaReport, CliError> {
    let sampler = SamplerSpec::uniform(request.tau, ZETA_SAMPLER_SEED);
    let state = problem.oracle.init_state(problem.x0.clone());
    Ok(theory::compute_zeta(&problem.oracle, &state, &sampler, request.trials)?)
}

fn io_failure(e: std::io::Error) -> CliError {
    CliError::Failure(e.to_string())
}
