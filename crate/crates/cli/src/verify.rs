//! Self-contained property suites behind the `verify` subcommand.
//!
//! Each suite prints one pass/fail line per property. Suites that probe an
//! objective use a built-in logistic instance unless `--config` supplies one.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use sscn_core::cubic::{self, CubicModel, SolverChoice};
use sscn_core::data::{self, SyntheticSpec};
use sscn_core::oracle::{PsiSlice, RegularizerSpec};
use sscn_core::rng::{self, RunRng};
use sscn_core::sketch::{empirical_projection, SamplerSpec, SketchSample};
use sscn_core::solver::{self, Algorithm, ConstantMode, Reference, RunConfig};
use sscn_core::theory;

use crate::config::{self, CliError, Problem};

/// Property family to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    /// Derived smoothness and third-derivative constants dominate sampled
    /// curvature probes.
    Bounds,
    /// Cubic-model solvers reach the model minimum.
    Solvers,
    /// Sketch samplers produce the projection expectation they promise.
    Projection,
    /// Observed convergence matches the predicted rates.
    Rates,
}

impl Suite {
    fn name(&self) -> &'static str {
        match self {
            Suite::Bounds => "bounds",
            Suite::Solvers => "solvers",
            Suite::Projection => "projection",
            Suite::Rates => "rates",
        }
    }
}

struct Check {
    name: String,
    ok: bool,
    detail: String,
}

impl Check {
    fn new(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), ok, detail: detail.into() }
    }
}

/// Runs one suite, printing a line per property. Fails (exit 1) naming the
/// first violated property.
pub fn cmd_verify(suite: Suite, config_path: Option<&Path>) -> Result<(), CliError> {
    let problem = problem_from(config_path)?;
    let checks = match suite {
        Suite::Bounds => bounds_suite(&problem)?,
        Suite::Solvers => solvers_suite(&problem)?,
        Suite::Projection => projection_suite()?,
        Suite::Rates => rates_suite(&problem)?,
    };
    let mut first_failure = None;
    let mut passed = 0usize;
    for check in &checks {
        if check.ok {
            passed += 1;
            println!("pass: {}", check.name);
        } else {
            println!("FAIL: {} ({})", check.name, check.detail);
            if first_failure.is_none() {
                first_failure = Some(check.name.clone());
            }
        }
    }
    println!("{}: {passed} of {} properties hold", suite.name(), checks.len());
    match first_failure {
        None => Ok(()),
        Some(name) => Err(CliError::Failure(format!("property failed: {name}"))),
    }
}

fn problem_from(config_path: Option<&Path>) -> Result<Problem, CliError> {
    match config_path {
        Some(path) => {
            let config = config::load(path)?;
            config::build_problem(&config)
        }
        None => {
            let spec = SyntheticSpec::Logistic { samples: 100, dim: 20, lambda: 0.1, seed: 77 };
            let generated = data::generate(&spec)?;
            let oracle = config::oracle_from(generated.objective, RegularizerSpec::None)?;
            Ok(Problem {
                oracle,
                x0: generated.x0,
                known_solution: None,
                warnings: Vec::new(),
                dataset_summary: "built-in logistic (100 samples, dimension 20, seed 77)".into(),
            })
        }
    }
}

fn random_point(dim: usize, rng: &mut RunRng) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.random_range(-2.0f64..2.0))
}

fn bounds_suite(problem: &Problem) -> Result<Vec<Check>, CliError> {
    let oracle = &problem.oracle;
    let d = oracle.dim();
    let report = theory::estimate_constants(oracle)
        .map_err(|e| CliError::Config(format!("the bounds suite needs the constants table: {e}")))?;
    let mut checks = Vec::new();
    let mut rng = rng::seeded(0xb0_0b5);

    // Coordinate cubic models with the derived per-coordinate weight must
    // over-estimate the objective everywhere along that coordinate.
    let trials = 1000;
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let state = oracle.init_state(random_point(d, &mut rng));
        let j = rng.random_range(0..d);
        let sketch = SketchSample::new(vec![j], d)?;
        let h = Array1::from_vec(vec![rng.random_range(-4.0f64..4.0)]);
        let check = theory::verify_cubic_bound(oracle, &state, &sketch, report.m_coord[j], &h.view());
        if !check.holds {
            violations += 1;
            worst = worst.max(check.actual - check.model);
        }
    }
    checks.push(Check::new(
        format!("coordinate cubic model over-estimates the objective ({trials} probes)"),
        violations == 0,
        format!("{violations} violations, worst overshoot {worst:.3e}"),
    ));

    // The per-coordinate curvature table dominates the Hessian diagonal.
    let probes = 200;
    let mut violations = 0usize;
    for _ in 0..probes {
        let state = oracle.init_state(random_point(d, &mut rng));
        let j = rng.random_range(0..d);
        let sketch = SketchSample::new(vec![j], d)?;
        let h_jj = oracle.subspace_hessian(&state, &sketch)[(0, 0)];
        if h_jj > report.l_coord[j] * (1.0 + 1e-9) + 1e-12 {
            violations += 1;
        }
    }
    checks.push(Check::new(
        format!("coordinate curvature table dominates the Hessian diagonal ({probes} probes)"),
        violations == 0,
        format!("{violations} violations"),
    ));

    // The global smoothness constant dominates random Rayleigh quotients.
    let probes = 100;
    let mut violations = 0usize;
    for _ in 0..probes {
        let state = oracle.init_state(random_point(d, &mut rng));
        let mut u = random_point(d, &mut rng);
        let norm = u.dot(&u).sqrt();
        if norm == 0.0 {
            continue;
        }
        u.mapv_inplace(|v| v / norm);
        let quotient = u.dot(&oracle.full_hvp(&state, &u.view()));
        if quotient > report.l_global * (1.0 + 1e-9) + 1e-12 {
            violations += 1;
        }
    }
    checks.push(Check::new(
        format!("global smoothness bound dominates Rayleigh quotients ({probes} probes)"),
        violations == 0,
        format!("{violations} violations"),
    ));

    // The third-derivative table dominates finite differences of the
    // Hessian diagonal along the same coordinate.
    let probes = 150;
    let eps = 1e-4;
    let mut violations = 0usize;
    for _ in 0..probes {
        let x = random_point(d, &mut rng);
        let j = rng.random_range(0..d);
        let sketch = SketchSample::new(vec![j], d)?;
        let mut plus = x.clone();
        plus[j] += eps;
        let mut minus = x;
        minus[j] -= eps;
        let h_plus = oracle.subspace_hessian(&oracle.init_state(plus), &sketch)[(0, 0)];
        let h_minus = oracle.subspace_hessian(&oracle.init_state(minus), &sketch)[(0, 0)];
        let third = ((h_plus - h_minus) / (2.0 * eps)).abs();
        if third > report.m_coord[j] * (1.0 + 1e-3) + 1e-6 {
            violations += 1;
        }
    }
    checks.push(Check::new(
        format!("third-derivative table dominates Hessian-diagonal slopes ({probes} probes)"),
        violations == 0,
        format!("{violations} violations"),
    ));

    Ok(checks)
}

/// Value of the scalar model g·h + q·h²/2 + m·|h|³/6.
fn scalar_model(g: f64, q: f64, m: f64, h: f64) -> f64 {
    g * h + 0.5 * q * h * h + m / 6.0 * h.abs().powi(3)
}

/// Dense grid plus golden-section refinement; handles the double-well shapes
/// negative curvature produces.
fn scalar_grid_min(g: f64, q: f64, m: f64) -> f64 {
    let (lo, hi) = (-12.0, 12.0);
    let cells = 2400;
    let mut best_h = lo;
    let mut best_v = f64::INFINITY;
    for i in 0..=cells {
        let h = lo + (hi - lo) * i as f64 / cells as f64;
        let v = scalar_model(g, q, m, h);
        if v < best_v {
            best_v = v;
            best_h = h;
        }
    }
    let step = (hi - lo) / cells as f64;
    let (mut a, mut b) = (best_h - step, best_h + step);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..120 {
        let c = b - phi * (b - a);
        let e = a + phi * (b - a);
        if scalar_model(g, q, m, c) <= scalar_model(g, q, m, e) {
            b = e;
        } else {
            a = c;
        }
    }
    scalar_model(g, q, m, 0.5 * (a + b))
}

fn solvers_suite(problem: &Problem) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let mut rng = rng::seeded(0x501_e3);

    // Closed-form scalar solves match an independent grid search.
    let cases = 300;
    let mut worst = 0f64;
    for _ in 0..cases {
        let g = rng.random_range(-3.0f64..3.0);
        let q = rng.random_range(-2.0f64..4.0);
        let m = rng.random_range(0.05f64..5.0);
        let sol = cubic::solve_1d(g, q, m, &PsiSlice::none(1))?;
        let solver_value = scalar_model(g, q, m, sol.step[0]);
        let grid_value = scalar_grid_min(g, q, m);
        worst = worst.max(solver_value - grid_value);
    }
    checks.push(Check::new(
        format!("scalar solver matches a dense grid search ({cases} cases)"),
        worst <= 1e-6,
        format!("worst excess over the grid optimum {worst:.3e}"),
    ));

    // Block solves land on exact stationary points of the model.
    let cases = 50;
    let mut worst_residual = 0f64;
    for _ in 0..cases {
        let tau = rng.random_range(2usize..=8);
        let model = random_block_model(tau, &mut rng);
        let sol = cubic::solve_block_exact(&model, 1e-12)?;
        let residual = model.gradient(&sol.step.view())?;
        let scale = 1.0 + sol.step.dot(&sol.step).sqrt();
        worst_residual = worst_residual.max(residual.dot(&residual).sqrt() / scale);
    }
    checks.push(Check::new(
        format!("block solver reaches model stationarity ({cases} cases)"),
        worst_residual <= 1e-8,
        format!("worst scaled residual {worst_residual:.3e}"),
    ));

    // The iterative solver agrees with the exact one on the model value.
    let cases = 30;
    let mut worst_gap = 0f64;
    for _ in 0..cases {
        let tau = rng.random_range(2usize..=6);
        let model = random_block_model(tau, &mut rng);
        let exact = cubic::solve_block_exact(&model, 1e-12)?;
        let iterative = cubic::solve_subproblem(
            &model,
            &SolverChoice::Iterative { tol: 1e-10, max_inner: 500 },
        )?;
        let v_exact = model.value(&exact.step.view());
        let v_iter = model.value(&iterative.step.view());
        worst_gap = worst_gap.max((v_iter - v_exact) / (1.0 + v_exact.abs()));
    }
    checks.push(Check::new(
        format!("iterative and exact solvers agree on the model value ({cases} cases)"),
        worst_gap <= 1e-6,
        format!("worst relative value excess {worst_gap:.3e}"),
    ));

    // The adaptive weight search only ever accepts descent steps on the
    // objective under test.
    let mut config = RunConfig::new(
        Algorithm::Sscn,
        SamplerSpec::uniform(1, 0),
        ConstantMode::Adaptive { initial: 1.0 },
        31,
    );
    config.max_iterations = 30;
    let result = solver::run(&problem.oracle, problem.x0.clone(), &config, None)?;
    let slack = 1e-12 * (1.0 + result.trace[0].f.abs());
    let monotone = result.trace.windows(2).all(|w| w[1].f <= w[0].f + slack);
    checks.push(Check::new(
        "adaptive weight search yields monotone descent (30 steps)",
        monotone,
        "an accepted step increased the objective".to_string(),
    ));

    Ok(checks)
}

fn random_block_model(tau: usize, rng: &mut RunRng) -> CubicModel {
    let g = Array1::from_shape_fn(tau, |_| rng.random_range(-2.0f64..2.0));
    let raw = Array2::from_shape_fn((tau, tau), |_| rng.random_range(-1.0f64..1.0));
    let hess = (&raw + &raw.t()) / 2.0;
    let m = rng.random_range(0.2f64..3.0);
    CubicModel::new(g, hess, m, PsiSlice::none(tau))
}

fn projection_suite() -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();
    let trials = 100_000;

    for &(d, tau) in &[(4usize, 2usize), (10, 3)] {
        let mut rng = rng::seeded(0x7a_11 + (d * 31 + tau) as u64);
        let spec = SamplerSpec::uniform(tau, 0);
        let projection = empirical_projection(&spec, d, trials, &mut rng)?;
        let p = tau as f64 / d as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        let mut worst_diag = 0f64;
        let mut worst_off = 0f64;
        for i in 0..d {
            for j in 0..d {
                let v = projection[(i, j)];
                if i == j {
                    worst_diag = worst_diag.max((v - p).abs());
                } else {
                    worst_off = worst_off.max(v.abs());
                }
            }
        }
        // The statistic is a max over d per-coordinate frequencies, so the
        // band is 4σ rather than the single-estimate 3σ.
        checks.push(Check::new(
            format!("uniform sketch projection is τ/d·I for d={d}, τ={tau} ({trials} draws)"),
            worst_diag <= 4.0 * sigma + 1e-12 && worst_off <= 1e-15,
            format!("worst diagonal error {worst_diag:.3e} (4σ = {:.3e})", 4.0 * sigma),
        ));
    }

    {
        let d = 6;
        let weights: Vec<f64> = (1..=d).map(|j| j as f64).collect();
        let total: f64 = weights.iter().sum();
        let probabilities: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let spec = SamplerSpec::single_weighted(probabilities.clone(), 0);
        let mut rng = rng::seeded(0x34_34);
        let projection = empirical_projection(&spec, d, trials, &mut rng)?;
        let mut worst_z = 0f64;
        for (j, &p) in probabilities.iter().enumerate() {
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            worst_z = worst_z.max((projection[(j, j)] - p).abs() / sigma);
        }
        checks.push(Check::new(
            format!("weighted single-coordinate marginals match the probabilities ({trials} draws)"),
            worst_z <= 3.0,
            format!("worst deviation {worst_z:.2}σ"),
        ));
    }

    {
        let d = 7;
        let spec = SamplerSpec::full(0);
        let mut rng = rng::seeded(0x56_56);
        let projection = empirical_projection(&spec, d, 10, &mut rng)?;
        let identity = Array2::<f64>::eye(d);
        let exact = projection == identity;
        checks.push(Check::new(
            "full sketch projection is exactly the identity",
            exact,
            "a full sketch left the projection short of I".to_string(),
        ));
    }

    Ok(checks)
}

fn rates_suite(problem: &Problem) -> Result<Vec<Check>, CliError> {
    if !problem.oracle.regularizer().is_none() {
        return Err(CliError::Config(
            "the rates suite needs a smooth objective; drop the regularizer".into(),
        ));
    }
    let mut checks = Vec::new();

    // A full sketch with zero cubic weight is an exact Newton step, which
    // solves a quadratic in one iteration.
    {
        let generated = data::generate(&SyntheticSpec::Quadratic {
            dim: 30,
            condition: 50.0,
            seed: 9,
        })?;
        let solution = generated.solution.expect("quadratic generator certifies its minimizer");
        let oracle = config::oracle_from(generated.objective, RegularizerSpec::None)?;
        let f_star = oracle.value_at(&solution);
        let mut config = RunConfig::new(
            Algorithm::Sscn,
            SamplerSpec::full(0),
            ConstantMode::FixedGlobal(0.0),
            1,
        );
        config.max_iterations = 1;
        let result = solver::run(&oracle, generated.x0.clone(), &config, None)?;
        let gap = result.final_state.value() - f_star;
        checks.push(Check::new(
            "full sketch with zero weight solves a quadratic in one step",
            gap.abs() <= 1e-9 * (1.0 + f_star.abs()),
            format!("one-step gap {gap:.3e}"),
        ));
    }

    // Single-coordinate steps on a quadratic contract the gap by 1 − ζ per
    // iteration in expectation.
    {
        let generated = data::generate(&SyntheticSpec::Quadratic {
            dim: 8,
            condition: 8.0,
            seed: 11,
        })?;
        let solution = generated.solution.expect("quadratic generator certifies its minimizer");
        let oracle = config::oracle_from(generated.objective, RegularizerSpec::None)?;
        let f_star = oracle.value_at(&solution);
        let reference = Reference { f_star, x_star: Some(solution) };
        let sampler = SamplerSpec::uniform(1, 0);
        let zeta = theory::compute_zeta(
            &oracle,
            &oracle.init_state(generated.x0.clone()),
            &sampler,
            1000,
        )?;
        let iterations = 400;
        let seeds = 60;
        let mut mean_gap = vec![0.0f64; iterations + 1];
        for seed in 0..seeds {
            let mut config = RunConfig::new(
                Algorithm::Sscn,
                sampler.clone(),
                ConstantMode::FixedGlobal(0.0),
                1000 + seed,
            );
            config.max_iterations = iterations;
            let result = solver::run(&oracle, generated.x0.clone(), &config, Some(&reference))?;
            for record in &result.trace {
                mean_gap[record.k] += record.gap.unwrap() / seeds as f64;
            }
        }
        // Fit the log decay over a window clear of the start-up transient
        // and the noise floor.
        let floor = 1e-12 * mean_gap[0];
        let points: Vec<(f64, f64)> = (40..=iterations)
            .filter(|&k| mean_gap[k] > floor)
            .map(|k| (k as f64, mean_gap[k].ln()))
            .collect();
        let n = points.len() as f64;
        let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (sxx, sxy) = points
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x * x, b + x * y));
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let fitted = slope.exp();
        let target = 1.0 - zeta.zeta;
        checks.push(Check::new(
            format!("single-coordinate contraction tracks 1 − ζ over {seeds} seeds"),
            (fitted - target).abs() <= 0.15 * target,
            format!("fitted contraction {fitted:.6}, 1 − ζ = {target:.6}"),
        ));
    }

    // The mean gap of uniform single-coordinate runs stays under the global
    // envelope built from the derived constants.
    {
        let oracle = &problem.oracle;
        let d = oracle.dim();
        let report = theory::estimate_constants(oracle).map_err(|e| {
            CliError::Config(format!("the rates suite needs the constants table: {e}"))
        })?;
        let solve = solver::reference_solve(oracle, problem.x0.clone(), 1e-11, 400)?;
        if !solve.converged {
            return Err(CliError::Failure(format!(
                "rates suite reference solve stalled at stationarity {:.3e}",
                solve.stationarity
            )));
        }
        let reference = Reference { f_star: solve.f_star, x_star: Some(solve.x) };
        let iterations = 500;
        let seeds = 15;
        let mut mean_gap = vec![0.0f64; iterations + 1];
        let mut radius = 0f64;
        for seed in 0..seeds {
            let mut config = RunConfig::new(
                Algorithm::Sscn,
                SamplerSpec::uniform(1, 0),
                ConstantMode::FixedGlobal(report.m_global),
                2000 + seed,
            );
            config.max_iterations = iterations;
            let result = solver::run(oracle, problem.x0.clone(), &config, Some(&reference))?;
            for record in &result.trace {
                mean_gap[record.k] += record.gap.unwrap() / seeds as f64;
            }
            radius = radius.max(result.max_dist_to_ref.expect("reference carries a minimizer"));
        }
        let ks: Vec<usize> = (0..=iterations).collect();
        let rate = theory::check_gap_series(
            d,
            1,
            report.l_global,
            report.m_global,
            radius,
            true,
            &ks,
            &mean_gap,
        );
        checks.push(Check::new(
            format!("mean gap stays under the global-rate envelope over {seeds} seeds"),
            rate.first_violation.is_none(),
            match rate.first_violation {
                Some(k) => format!("first violation at iteration {k}"),
                None => String::new(),
            },
        ));
    }

    Ok(checks)
}
