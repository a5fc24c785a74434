//! Dataset ingestion and synthetic problem generation.
//!
//! The text format is the LIBSVM interchange format: one sample per line,
//! `label index:value ...` with 1-based strictly ascending indices. Labels
//! are binary; `0` is accepted as an alias for `-1`. Synthetic generators
//! cover the three benchmark families: a softmax-smoothed max with its
//! minimizer placed at the origin by construction, random quadratics with a
//! prescribed spectrum, and separable logistic instances with planted labels.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::{DesignMatrix, RowEntries};
use crate::oracle::{
    LogSumExpObjective, LogisticObjective, Objective, QuadraticObjective,
};
use crate::rng::{self, RunRng};

/// A parsed classification dataset: design matrix, ±1 labels, and any
/// preprocessing notes accumulated along the way.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub data: DesignMatrix,
    pub labels: Array1<f64>,
    /// True once columns have been rescaled to unit norm.
    pub normalized: bool,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn num_samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }
}

/// Recipe for one synthetic instance. Serialized next to generated data so
/// every instance can be rebuilt bit-for-bit from its sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticSpec {
    /// Softmax-smoothed max of `n = 6d` affine forms, minimizer at 0,
    /// starting point at the all-ones vector.
    LogSumExp { dim: usize, sigma: f64, seed: u64 },
    /// `½xᵀAx − bᵀx` with log-uniform spectrum on [1, condition].
    Quadratic { dim: usize, condition: f64, seed: u64 },
    /// Logistic loss on uniform features with labels from a planted vector.
    Logistic { samples: usize, dim: usize, lambda: f64, seed: u64 },
}

impl SyntheticSpec {
    pub fn seed(&self) -> u64 {
        match *self {
            SyntheticSpec::LogSumExp { seed, .. }
            | SyntheticSpec::Quadratic { seed, .. }
            | SyntheticSpec::Logistic { seed, .. } => seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SyntheticSpec::LogSumExp { dim, sigma, .. } => {
                if dim == 0 {
                    return Err(Error::Config("log-sum-exp dimension must be positive".into()));
                }
                if !(sigma > 0.0 && sigma.is_finite()) {
                    return Err(Error::Config(format!(
                        "smoothing parameter must be positive and finite, got {sigma}"
                    )));
                }
            }
            SyntheticSpec::Quadratic { dim, condition, .. } => {
                if dim == 0 {
                    return Err(Error::Config("quadratic dimension must be positive".into()));
                }
                if !(condition >= 1.0 && condition.is_finite()) {
                    return Err(Error::Config(format!(
                        "condition number must be at least 1, got {condition}"
                    )));
                }
                if dim == 1 && condition > 1.0 {
                    return Err(Error::Config(
                        "a 1x1 matrix cannot carry both spectrum extremes; use condition 1".into(),
                    ));
                }
            }
            SyntheticSpec::Logistic { samples, dim, lambda, .. } => {
                if dim == 0 || samples == 0 {
                    return Err(Error::Config(
                        "logistic instance needs positive sample and feature counts".into(),
                    ));
                }
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return Err(Error::Config(format!(
                        "ridge parameter must be nonnegative and finite, got {lambda}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A generated instance ready to wrap in an oracle: the objective, the
/// conventional starting point, and the minimizer when the construction
/// pins one.
#[derive(Debug, Clone)]
pub struct SyntheticProblem {
    pub objective: Objective,
    pub x0: Array1<f64>,
    pub solution: Option<Array1<f64>>,
}

/// Builds the instance a spec describes.
pub fn generate(spec: &SyntheticSpec) -> Result<SyntheticProblem> {
    spec.validate()?;
    match *spec {
        SyntheticSpec::LogSumExp { dim, sigma, seed } => {
            let (objective, x0) = generate_logsumexp(dim, sigma, seed)?;
            Ok(SyntheticProblem {
                objective: Objective::LogSumExp(objective),
                x0,
                solution: Some(Array1::zeros(dim)),
            })
        }
        SyntheticSpec::Quadratic { dim, condition, seed } => {
            let objective = generate_quadratic(dim, condition, seed)?;
            let solution = objective.known_solution.clone();
            Ok(SyntheticProblem {
                objective: Objective::Quadratic(objective),
                x0: Array1::zeros(dim),
                solution,
            })
        }
        SyntheticSpec::Logistic { samples, dim, lambda, seed } => {
            let objective = generate_logistic(samples, dim, lambda, seed)?;
            Ok(SyntheticProblem {
                objective: Objective::Logistic(objective),
                x0: Array1::zeros(dim),
                solution: None,
            })
        }
    }
}

/// Softmax-smoothed max with the minimizer at the origin.
///
/// Draws `ã_i` and `b` uniform on [−1,1] with `n = 6d`, then shifts every row
/// by the gradient of the auxiliary objective at 0, which zeroes the gradient
/// there (the softmax weights at 0 depend only on `b`, so the shift is exact).
/// Returns the objective and the all-ones starting point.
pub fn generate_logsumexp(
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<(LogSumExpObjective, Array1<f64>)> {
    let n = 6 * dim;
    let mut rng = rng::seeded(seed);
    let mut a = Array2::from_shape_fn((n, dim), |_| rng.random_range(-1.0..1.0));
    let b = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));

    // softmax(−b/σ), computed against the max for stability
    let top = b.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let mut weights = b.mapv(|bi| ((top - bi) / sigma).exp());
    let total = weights.sum();
    weights.mapv_inplace(|w| w / total);

    let shift = a.t().dot(&weights);
    for mut row in a.rows_mut() {
        row -= &shift;
    }

    let objective = LogSumExpObjective::new(DesignMatrix::Dense(a), b, sigma)?;
    Ok((objective, Array1::ones(dim)))
}

/// Random quadratic `A = QΛQᵀ` with orthogonal `Q` from the QR factorization
/// of a Gaussian matrix and a log-uniform spectrum on [1, condition] whose
/// extremes are pinned exactly. The solved minimizer is stored on the
/// objective for gap reporting.
pub fn generate_quadratic(dim: usize, condition: f64, seed: u64) -> Result<QuadraticObjective> {
    let mut rng = rng::seeded(seed);
    let a = if condition == 1.0 {
        Array2::eye(dim)
    } else {
        let gauss = DMatrix::from_fn(dim, dim, |_, _| standard_normal(&mut rng));
        let q = gauss.qr().q();
        let mut spectrum = Array1::zeros(dim);
        spectrum[0] = 1.0;
        spectrum[dim - 1] = condition;
        for i in 1..dim - 1 {
            spectrum[i] = rng.random_range(0.0..condition.ln()).exp();
        }
        let mut a = Array2::zeros((dim, dim));
        for k in 0..dim {
            let col = q.column(k);
            for i in 0..dim {
                for j in 0..dim {
                    a[(i, j)] += spectrum[k] * col[i] * col[j];
                }
            }
        }
        // exact symmetry despite accumulation order
        for i in 0..dim {
            for j in 0..i {
                let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
                a[(i, j)] = avg;
                a[(j, i)] = avg;
            }
        }
        a
    };
    let b = Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0));
    let solution = linalg::solve_spd(&a, &b)?;
    let mut objective = QuadraticObjective::new(a, b)?;
    objective.known_solution = Some(solution);
    Ok(objective)
}

/// Logistic instance with uniform [−1,1] features and labels planted as the
/// sign of a random linear functional, so the unregularized problem is
/// separable and the ridge term decides the scale of the solution.
pub fn generate_logistic(
    samples: usize,
    dim: usize,
    lambda: f64,
    seed: u64,
) -> Result<LogisticObjective> {
    let (a, _, labels) = logistic_parts(samples, dim, seed);
    LogisticObjective::new(DesignMatrix::Dense(a), labels, lambda)
}

fn logistic_parts(samples: usize, dim: usize, seed: u64) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let mut rng = rng::seeded(seed);
    let a = Array2::from_shape_fn((samples, dim), |_| rng.random_range(-1.0..1.0));
    let planted = Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0));
    let margins = a.dot(&planted);
    let labels = margins.mapv(|m| if m < 0.0 { -1.0 } else { 1.0 });
    (a, planted, labels)
}

/// Standard normal via Box–Muller on the run generator, keeping generated
/// instances identical across platforms.
fn standard_normal(rng: &mut RunRng) -> f64 {
    let u1: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Parses LIBSVM-format text into a dataset.
///
/// Blank lines and `#` comments are skipped; labels must be −1, 0, or +1
/// (0 maps to −1); feature indices are 1-based and strictly ascending within
/// a line. The column count is the largest index seen anywhere in the file.
pub fn parse_libsvm(text: &str) -> Result<Dataset> {
    let mut rows: RowEntries = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut max_col = 0usize;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().expect("non-empty line has a first token");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("label `{label_tok}` is not a number"),
        })?;
        let label = if label == -1.0 || label == 1.0 {
            label
        } else if label == 0.0 {
            -1.0
        } else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("label {label} is not binary (expected -1, 0, or 1)"),
            });
        };

        let mut row = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (idx_s, val_s) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("feature `{tok}` is not in index:value form"),
            })?;
            let col: usize = idx_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("feature index `{idx_s}` is not a positive integer"),
            })?;
            if col == 0 {
                return Err(Error::Parse {
                    line: line_no,
                    message: "feature indices are 1-based; found index 0".into(),
                });
            }
            if col <= last {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("feature index {col} repeats or decreases"),
                });
            }
            let val: f64 = val_s.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("feature value `{val_s}` is not a number"),
            })?;
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("feature value {val} is not finite"),
                });
            }
            last = col;
            max_col = max_col.max(col);
            row.push((col - 1, val));
        }
        rows.push(row);
        labels.push(label);
    }

    if rows.is_empty() {
        return Err(Error::Config("dataset contains no samples".into()));
    }
    let data = DesignMatrix::from_row_entries(rows.len(), max_col, &rows);
    Ok(Dataset { data, labels: Array1::from(labels), normalized: false, warnings: Vec::new() })
}

/// Reads and parses a LIBSVM file.
pub fn load_libsvm(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)?;
    parse_libsvm(&text)
}

/// Renders a dataset back to LIBSVM text. Stored zeros are dropped, so the
/// output is the canonical sparse form of the same matrix.
pub fn serialize_libsvm(ds: &Dataset) -> String {
    let rows = ds.data.row_entries();
    let mut out = String::new();
    for (row, &label) in rows.iter().zip(ds.labels.iter()) {
        write!(out, "{label}").expect("writing to a String cannot fail");
        for &(j, v) in row {
            write!(out, " {}:{}", j + 1, v).expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

/// Rescales every column to unit Euclidean norm. All-zero columns cannot be
/// scaled and are dropped instead, with a warning recorded on the result.
pub fn normalize_columns(ds: Dataset) -> Dataset {
    let d = ds.data.ncols();
    let sq = ds.data.col_sq_norms();
    let empty: Vec<usize> = (0..d).filter(|&j| sq[j] == 0.0).collect();
    let mut warnings = ds.warnings;

    let data = if empty.is_empty() {
        let mut data = ds.data;
        for j in 0..d {
            data.scale_column(j, 1.0 / sq[j].sqrt());
        }
        data
    } else {
        warnings.push(format!(
            "dropped {} all-zero column(s) during normalization: {:?} (1-based)",
            empty.len(),
            empty.iter().map(|j| j + 1).collect::<Vec<_>>()
        ));
        let mut remap = vec![usize::MAX; d];
        let mut next = 0usize;
        for j in 0..d {
            if sq[j] > 0.0 {
                remap[j] = next;
                next += 1;
            }
        }
        let rows: RowEntries = ds
            .data
            .row_entries()
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|(j, _)| sq[*j] > 0.0)
                    .map(|&(j, v)| (remap[j], v / sq[j].sqrt()))
                    .collect()
            })
            .collect();
        DesignMatrix::from_row_entries(ds.data.nrows(), next, &rows)
    };

    Dataset { data, labels: ds.labels, normalized: true, warnings }
}
