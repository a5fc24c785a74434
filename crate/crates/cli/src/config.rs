//! Experiment configuration: fail-closed JSON parsing and translation into
//! core problem and run descriptions.
//!
//! Unknown keys anywhere in the document are rejected so a typo cannot
//! silently fall back to a default mid-sweep.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use sscn_core::cubic::SolverChoice;
use sscn_core::data::{self, Dataset, SyntheticSpec};
use sscn_core::error::Error as CoreError;
use sscn_core::oracle::{LogisticObjective, Objective, Oracle, RegularizerSpec};
use sscn_core::sketch::SamplerSpec;
use sscn_core::solver::{Algorithm, ConstantMode, RunConfig};
use sscn_core::theory::ConstantsReport;

/// Failures split by exit code: configuration problems exit 2, run and
/// verification failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Failure(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) | CliError::Failure(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            // Bad settings, malformed datasets, and unsupported combinations
            // are all problems with what was asked for, not with the solve.
            CoreError::Config(_) | CoreError::Parse { .. } | CoreError::Unsupported(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Failure(other.to_string()),
        }
    }
}

fn default_parallel() -> usize {
    1
}

/// Root of the experiment JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    /// Objective built on the dataset. Required for loaded datasets; for
    /// synthetic ones it is implied by the generator and, when given, must
    /// agree with it.
    #[serde(default)]
    pub objective: Option<ObjectiveSpec>,
    /// Separable term ψ added on top of the smooth objective. Only the
    /// subspace cubic Newton method accepts a non-trivial ψ.
    #[serde(default)]
    pub regularizer: Option<RegularizerSpec>,
    /// Rescale dataset columns to unit norm before building the objective.
    /// Valid for logistic objectives, whose matrix rows are data samples.
    #[serde(default)]
    pub normalize: bool,
    pub algorithms: Vec<AlgorithmSpec>,
    /// Every algorithm runs once per seed; the seed drives sketch sampling.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// Worker threads for the (algorithm × seed) grid.
    #[serde(default = "default_parallel")]
    pub parallel: usize,
    /// When present, estimate ζ at x₀ for a uniform sketch of this size and
    /// record it in the run metadata.
    #[serde(default)]
    pub zeta: Option<ZetaRequest>,
    /// Accuracy settings for the `reference` subcommand.
    #[serde(default)]
    pub reference: Option<ReferenceSettings>,
}

/// Where the design matrix comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    /// Path to a `label index:value ...` file (1-based indices).
    Libsvm(PathBuf),
    Synthetic(SyntheticSpec),
}

/// Objective family and its parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    Logistic { lambda: f64 },
    LogSumExp { sigma: f64 },
    Quadratic,
}

/// Sketch distribution for one algorithm entry. The run seed governs the
/// actual draws, so no sampler seed appears here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    Uniform { tau: usize },
    SingleWeighted { probabilities: Vec<f64> },
    Full,
}

impl SamplerConfig {
    pub fn to_spec(&self) -> SamplerSpec {
        match self {
            SamplerConfig::Uniform { tau } => SamplerSpec::uniform(*tau, 0),
            SamplerConfig::SingleWeighted { probabilities } => {
                SamplerSpec::single_weighted(probabilities.clone(), 0)
            }
            SamplerConfig::Full => SamplerSpec::full(0),
        }
    }

    /// Short token for file names.
    pub fn tag(&self) -> String {
        match self {
            SamplerConfig::Uniform { tau } => format!("tau{tau}"),
            SamplerConfig::SingleWeighted { .. } => "weighted".into(),
            SamplerConfig::Full => "full".into(),
        }
    }
}

/// How the per-step constant is chosen, including the `estimated` shorthand
/// that resolves to the analytically derived per-coordinate table.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightsSpec {
    Adaptive { initial: f64 },
    FixedGlobal(f64),
    CoordTable(Vec<f64>),
    /// Per-coordinate constants estimated from the objective: cubic weights
    /// for the Newton method, curvature bounds for first-order descent.
    Estimated,
}

impl WeightsSpec {
    pub fn resolve(
        &self,
        algorithm: Algorithm,
        constants: Option<&ConstantsReport>,
    ) -> Result<ConstantMode, CliError> {
        match self {
            WeightsSpec::Adaptive { initial } => Ok(ConstantMode::Adaptive { initial: *initial }),
            WeightsSpec::FixedGlobal(v) => Ok(ConstantMode::FixedGlobal(*v)),
            WeightsSpec::CoordTable(table) => Ok(ConstantMode::CoordTable(table.clone())),
            WeightsSpec::Estimated => {
                let report = constants.ok_or_else(|| {
                    CliError::Config(
                        "weights: `estimated` needs the constants table, which is unavailable \
                         at this dimension"
                            .into(),
                    )
                })?;
                match algorithm {
                    Algorithm::Sscn => Ok(ConstantMode::CoordTable(report.m_coord.clone())),
                    Algorithm::Cd | Algorithm::Acd => {
                        Ok(ConstantMode::CoordTable(report.l_coord.clone()))
                    }
                    Algorithm::Sdna => Err(CliError::Config(
                        "weights: sdna derives curvature blocks directly; use `fixed_global: 0`"
                            .into(),
                    )),
                }
            }
        }
    }

    fn tag(&self) -> &'static str {
        match self {
            WeightsSpec::Adaptive { .. } => "adaptive",
            WeightsSpec::FixedGlobal(_) => "fixed",
            WeightsSpec::CoordTable(_) => "table",
            WeightsSpec::Estimated => "estimated",
        }
    }
}

fn default_max_iterations() -> usize {
    1000
}

fn default_trace_every() -> usize {
    1
}

/// One method entry in the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub name: Algorithm,
    pub sampler: SamplerConfig,
    pub weights: WeightsSpec,
    /// File-name label; derived from the method, sampler, and weights when
    /// absent.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Stop once the gap (or stationarity, without a reference) reaches this.
    #[serde(default)]
    pub target_gap: Option<f64>,
    #[serde(default)]
    pub time_limit_seconds: Option<f64>,
    /// Trace cadence in iterations.
    #[serde(default = "default_trace_every")]
    pub trace_every: usize,
    #[serde(default)]
    pub solver: SolverChoice,
}

impl AlgorithmSpec {
    pub fn to_run_config(
        &self,
        seed: u64,
        constants: Option<&ConstantsReport>,
    ) -> Result<RunConfig, CliError> {
        Ok(RunConfig {
            algorithm: self.name,
            sampler: self.sampler.to_spec(),
            weight_mode: self.weights.resolve(self.name, constants)?,
            solver: self.solver.clone(),
            max_iterations: self.max_iterations,
            target_gap: self.target_gap,
            time_limit_seconds: self.time_limit_seconds,
            trace_every: self.trace_every,
            seed,
        })
    }

    pub fn display_label(&self) -> String {
        match &self.label {
            Some(label) => sanitize_label(label),
            None => format!(
                "{}_{}_{}",
                self.name.as_str(),
                self.sampler.tag(),
                self.weights.tag()
            ),
        }
    }
}

fn default_zeta_trials() -> usize {
    20_000
}

/// Request for a ζ estimate alongside the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaRequest {
    pub tau: usize,
    /// Monte Carlo draws when exact enumeration is out of reach.
    #[serde(default = "default_zeta_trials")]
    pub trials: usize,
}

fn default_reference_tol() -> f64 {
    1e-12
}

fn default_reference_outer() -> usize {
    500
}

/// Stopping rule for the high-accuracy reference solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSettings {
    #[serde(default = "default_reference_tol")]
    pub tol: f64,
    #[serde(default = "default_reference_outer")]
    pub max_outer: usize,
}

impl Default for ReferenceSettings {
    fn default() -> Self {
        ReferenceSettings { tol: default_reference_tol(), max_outer: default_reference_outer() }
    }
}

/// Reads and validates an experiment file.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.algorithms.is_empty() {
            return Err(CliError::Config("algorithms: at least one entry is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(CliError::Config("seeds: at least one entry is required".into()));
        }
        if self.parallel == 0 {
            return Err(CliError::Config("parallel: must be at least 1".into()));
        }
        for (i, spec) in self.algorithms.iter().enumerate() {
            if spec.max_iterations == 0 {
                return Err(CliError::Config(format!(
                    "algorithms[{i}].max_iterations: must be at least 1"
                )));
            }
        }
        if let Some(z) = &self.zeta {
            if z.tau == 0 || z.trials == 0 {
                return Err(CliError::Config(
                    "zeta: tau and trials must both be at least 1".into(),
                ));
            }
        }
        if let Some(r) = &self.reference {
            if !(r.tol > 0.0) {
                return Err(CliError::Config("reference.tol: must be positive".into()));
            }
            if r.max_outer == 0 {
                return Err(CliError::Config("reference.max_outer: must be at least 1".into()));
            }
        }
        Ok(())
    }
}

/// Fully built problem instance: the oracle plus everything the runner needs
/// to describe it.
pub struct Problem {
    pub oracle: Oracle,
    pub x0: Array1<f64>,
    /// Minimizer of the composite objective when the generator certifies one.
    pub known_solution: Option<Array1<f64>>,
    pub warnings: Vec<String>,
    /// Human-oriented dataset description echoed into run metadata.
    pub dataset_summary: String,
}

/// Builds the oracle and start point a config describes.
pub fn build_problem(config: &ExperimentConfig) -> Result<Problem, CliError> {
    let regularizer = config.regularizer.unwrap_or_default();
    match &config.dataset {
        DatasetSpec::Synthetic(spec) => {
            check_objective_consistency(spec, config.objective.as_ref())?;
            let generated = data::generate(spec)?;
            let mut objective = generated.objective;
            let mut solution = generated.solution;
            let mut warnings = Vec::new();
            if config.normalize {
                let Objective::Logistic(logistic) = objective else {
                    return Err(CliError::Config(
                        "normalize: applies to logistic objectives only".into(),
                    ));
                };
                let (rebuilt, notes) = normalize_logistic(logistic)?;
                objective = Objective::Logistic(rebuilt);
                warnings.extend(notes);
                // Rescaling the features moves the minimizer.
                solution = None;
            }
            let summary = synthetic_summary(spec, &objective);
            let oracle = oracle_from(objective, regularizer)?;
            // A generator minimizer survives a regularizer only at the
            // origin, where both ψ terms have 0 in their subdifferential.
            let keeps_solution = regularizer.is_none()
                || solution.as_ref().is_some_and(|s| s.iter().all(|&v| v == 0.0));
            Ok(Problem {
                oracle,
                x0: generated.x0,
                known_solution: if keeps_solution { solution } else { None },
                warnings,
                dataset_summary: summary,
            })
        }
        DatasetSpec::Libsvm(path) => {
            let Some(ObjectiveSpec::Logistic { lambda }) = config.objective.as_ref() else {
                return Err(CliError::Config(
                    "objective: loaded datasets require {\"logistic\": {\"lambda\": ...}}".into(),
                ));
            };
            if !lambda.is_finite() || *lambda < 0.0 {
                return Err(CliError::Config(format!(
                    "objective.lambda: must be finite and nonnegative, got {lambda}"
                )));
            }
            let mut ds = data::load_libsvm(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if config.normalize {
                ds = data::normalize_columns(ds);
            }
            let warnings = ds.warnings.clone();
            let n = ds.num_samples();
            let dim = ds.dim();
            let objective =
                Objective::Logistic(LogisticObjective::new(ds.data, ds.labels, *lambda)?);
            let oracle = oracle_from(objective, regularizer)?;
            Ok(Problem {
                oracle,
                x0: Array1::zeros(dim),
                known_solution: None,
                warnings,
                dataset_summary: format!(
                    "libsvm {} ({n} samples, dimension {dim})",
                    path.display()
                ),
            })
        }
    }
}

pub(crate) fn oracle_from(
    objective: Objective,
    regularizer: RegularizerSpec,
) -> Result<Oracle, CoreError> {
    let oracle = match objective {
        Objective::Quadratic(q) => Oracle::quadratic(q),
        Objective::Logistic(l) => Oracle::logistic(l),
        Objective::LogSumExp(l) => Oracle::log_sum_exp(l),
    };
    oracle.with_regularizer(regularizer)
}

fn normalize_logistic(
    logistic: LogisticObjective,
) -> Result<(LogisticObjective, Vec<String>), CliError> {
    let lambda = logistic.lambda();
    let ds = Dataset {
        data: logistic.data().clone(),
        labels: logistic.labels().clone(),
        normalized: false,
        warnings: Vec::new(),
    };
    let ds = data::normalize_columns(ds);
    let warnings = ds.warnings.clone();
    Ok((LogisticObjective::new(ds.data, ds.labels, lambda)?, warnings))
}

fn check_objective_consistency(
    spec: &SyntheticSpec,
    objective: Option<&ObjectiveSpec>,
) -> Result<(), CliError> {
    let Some(obj) = objective else { return Ok(()) };
    let consistent = match (spec, obj) {
        (SyntheticSpec::Logistic { lambda, .. }, ObjectiveSpec::Logistic { lambda: l }) => {
            lambda == l
        }
        (SyntheticSpec::LogSumExp { sigma, .. }, ObjectiveSpec::LogSumExp { sigma: s }) => {
            sigma == s
        }
        (SyntheticSpec::Quadratic { .. }, ObjectiveSpec::Quadratic) => true,
        _ => false,
    };
    if consistent {
        Ok(())
    } else {
        Err(CliError::Config(
            "objective: does not match the synthetic dataset; drop the key or align the \
             parameters"
                .into(),
        ))
    }
}

fn synthetic_summary(spec: &SyntheticSpec, objective: &Objective) -> String {
    let kind = match objective {
        Objective::Quadratic(_) => "quadratic",
        Objective::Logistic(_) => "logistic",
        Objective::LogSumExp(_) => "log_sum_exp",
    };
    match spec {
        SyntheticSpec::LogSumExp { dim, sigma, seed } => {
            format!("synthetic {kind} (dimension {dim}, sigma {sigma}, seed {seed})")
        }
        SyntheticSpec::Quadratic { dim, condition, seed } => {
            format!("synthetic {kind} (dimension {dim}, condition {condition}, seed {seed})")
        }
        SyntheticSpec::Logistic { samples, dim, lambda, seed } => format!(
            "synthetic {kind} ({samples} samples, dimension {dim}, lambda {lambda}, seed {seed})"
        ),
    }
}

/// Keeps file names portable: anything outside `[A-Za-z0-9_-]` becomes `-`.
pub fn sanitize_label(label: &str) -> String {
    let cleaned: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' })
        .collect();
    if cleaned.is_empty() {
        "run".into()
    } else {
        cleaned
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "dataset": {"synthetic": {"quadratic": {"dim": 6, "condition": 10.0, "seed": 3}}},
            "algorithms": [
                {"name": "sscn", "sampler": {"uniform": {"tau": 2}},
                 "weights": {"adaptive": {"initial": 1.0}}, "max_iterations": 40}
            ],
            "seeds": [1, 2],
            "output_dir": "out"
        }"#
        .to_string()
    }

    #[test]
    fn minimal_config_parses_and_builds() {
        let config: ExperimentConfig = serde_json::from_str(&minimal_json()).unwrap();
        config.validate().unwrap();
        let problem = build_problem(&config).unwrap();
        assert_eq!(problem.oracle.dim(), 6);
        assert!(problem.known_solution.is_some());
        let rc = config.algorithms[0].to_run_config(7, None).unwrap();
        assert_eq!(rc.seed, 7);
        assert_eq!(rc.max_iterations, 40);
        rc.validate(&problem.oracle).unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_at_every_level() {
        let top = minimal_json().replace("\"seeds\"", "\"extra\": 1, \"seeds\"");
        let err = serde_json::from_str::<ExperimentConfig>(&top).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");

        let nested = minimal_json().replace("\"max_iterations\": 40", "\"max_iters\": 40");
        let err = serde_json::from_str::<ExperimentConfig>(&nested).unwrap_err().to_string();
        assert!(err.contains("max_iters"), "{err}");
    }

    #[test]
    fn estimated_weights_resolve_per_algorithm() {
        let report = ConstantsReport {
            objective: "logistic".into(),
            m_global: 1.0,
            m_coord: vec![0.5, 0.25],
            l_global: 2.0,
            l_coord: vec![1.0, 0.75],
            mu: 0.1,
            c_third: 0.1,
            eigen_exact: true,
        };
        let m = WeightsSpec::Estimated.resolve(Algorithm::Sscn, Some(&report)).unwrap();
        assert_eq!(m, ConstantMode::CoordTable(vec![0.5, 0.25]));
        let l = WeightsSpec::Estimated.resolve(Algorithm::Cd, Some(&report)).unwrap();
        assert_eq!(l, ConstantMode::CoordTable(vec![1.0, 0.75]));
        assert!(WeightsSpec::Estimated.resolve(Algorithm::Sdna, Some(&report)).is_err());
        assert!(WeightsSpec::Estimated.resolve(Algorithm::Sscn, None).is_err());
    }

    #[test]
    fn objective_consistency_is_enforced() {
        let mismatched = minimal_json().replace(
            "\"algorithms\"",
            "\"objective\": {\"logistic\": {\"lambda\": 0.1}}, \"algorithms\"",
        );
        let config: ExperimentConfig = serde_json::from_str(&mismatched).unwrap();
        let Err(err) = build_problem(&config) else { panic!("mismatch accepted") };
        assert!(matches!(err, CliError::Config(_)));
        let matching = minimal_json()
            .replace("\"algorithms\"", "\"objective\": \"quadratic\", \"algorithms\"");
        let config: ExperimentConfig = serde_json::from_str(&matching).unwrap();
        build_problem(&config).unwrap();
    }

    #[test]
    fn normalize_is_logistic_only() {
        let quad = minimal_json().replace("\"seeds\"", "\"normalize\": true, \"seeds\"");
        let config: ExperimentConfig = serde_json::from_str(&quad).unwrap();
        let Err(err) = build_problem(&config) else { panic!("normalize accepted") };
        assert!(err.to_string().contains("normalize"));

        let logistic = r#"{
            "dataset": {"synthetic": {"logistic": {"samples": 30, "dim": 5, "lambda": 0.1, "seed": 4}}},
            "normalize": true,
            "algorithms": [
                {"name": "cd", "sampler": {"uniform": {"tau": 1}}, "weights": "estimated"}
            ],
            "seeds": [1],
            "output_dir": "out"
        }"#;
        let config: ExperimentConfig = serde_json::from_str(logistic).unwrap();
        build_problem(&config).unwrap();
    }

    #[test]
    fn origin_solution_survives_a_regularizer() {
        // The log-sum-exp generator centers its minimizer at the origin,
        // which also minimizes the composite with either ψ.
        let base = r#"{
            "dataset": {"synthetic": {"log_sum_exp": {"dim": 5, "sigma": 0.5, "seed": 2}}},
            "regularizer": REG,
            "algorithms": [
                {"name": "sscn", "sampler": "full", "weights": {"adaptive": {"initial": 1.0}}}
            ],
            "seeds": [1],
            "output_dir": "out"
        }"#;
        let with_l1 = base.replace("REG", r#"{"l1": {"lambda": 0.05}}"#);
        let config: ExperimentConfig = serde_json::from_str(&with_l1).unwrap();
        let problem = build_problem(&config).unwrap();
        assert!(problem.known_solution.is_some());

        // A quadratic minimizer away from the origin does not.
        let quad = minimal_json()
            .replace("\"seeds\"", "\"regularizer\": {\"squared_l2\": {\"lambda\": 0.1}}, \"seeds\"");
        let config: ExperimentConfig = serde_json::from_str(&quad).unwrap();
        let problem = build_problem(&config).unwrap();
        assert!(problem.known_solution.is_none());
    }

    #[test]
    fn labels_are_sanitized_for_file_names() {
        assert_eq!(sanitize_label("sscn τ=1 (adaptive)"), "sscn---1--adaptive-");
        assert_eq!(sanitize_label(""), "run");
        let spec = AlgorithmSpec {
            name: Algorithm::Sscn,
            sampler: SamplerConfig::Uniform { tau: 3 },
            weights: WeightsSpec::Estimated,
            label: None,
            max_iterations: 10,
            target_gap: None,
            time_limit_seconds: None,
            trace_every: 1,
            solver: SolverChoice::Auto,
        };
        assert_eq!(spec.display_label(), "sscn_tau3_estimated");
    }
}
