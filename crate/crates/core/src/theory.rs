//! Constants and certificates that connect runs back to the convergence
//! theory: third-derivative bounds feeding the cubic weight, coordinate
//! smoothness tables, the expected-projection number ζ that governs the
//! linear phase, the sublinear global-rate envelope, and local quantities
//! (Newton decrement, cubic upper-bound checks) used by the verification
//! suites.

use itertools::Itertools;
use ndarray::{Array2, ArrayView1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::oracle::{IterateState, Objective, Oracle, RegularizerSpec};
use crate::rng;
use crate::sketch::{sample_sketch, SamplerKind, SamplerSpec, SketchSample};

/// Beyond this dimension the exact eigenvalue extremes are replaced by
/// cheap certified bounds (flagged in the report).
const EXACT_EIGEN_LIMIT: usize = 600;

/// Hard cap for the constants report; these tables are meant for the
/// benchmark scale, not production-sized data.
const CONSTANTS_DIM_LIMIT: usize = 2000;

/// Subset enumerations larger than this fall back to Monte Carlo.
const ENUMERATION_LIMIT: f64 = 1e6;

/// Smoothness and third-derivative constants of one objective.
///
/// `m_*` bound the third directional derivative (the quantity the cubic
/// weight must dominate): `m_global` over unit directions, `m_coord[j]`
/// along coordinate j. `l_*` are the matching second-derivative bounds.
/// `c_third` is the scalar-loss factor the m-values are built from (0 for
/// quadratics, whose third derivative vanishes).
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    pub objective: String,
    pub m_global: f64,
    pub m_coord: Vec<f64>,
    pub l_global: f64,
    pub l_coord: Vec<f64>,
    /// Strong-convexity lower bound (0 when none is certified).
    pub mu: f64,
    pub c_third: f64,
    /// False when `l_global`/`mu` come from norm bounds instead of an exact
    /// eigendecomposition (large dimensions).
    pub eigen_exact: bool,
}

/// Computes the constants table for an oracle's smooth part.
///
/// Logistic loss: the scalar loss has `|φ″| ≤ 1/4` and `|φ‴| ≤ 1/(6√3)`, so
/// with rows `aᵢ`, `M = (1/(6√3 n)) Σ‖aᵢ‖³` and per-coordinate variants use
/// `|a_ij|³`. Softmax-smoothed max: the third cumulant of a variable with
/// range `2m` is at most `2m³`, giving `M = (2/σ²) maxᵢ‖aᵢ‖³`. Quadratics
/// have exact second derivatives and no third.
pub fn estimate_constants(oracle: &Oracle) -> Result<ConstantsReport> {
    let d = oracle.dim();
    if d > CONSTANTS_DIM_LIMIT {
        return Err(Error::Unsupported(format!(
            "constants report supports up to {CONSTANTS_DIM_LIMIT} dimensions, got {d}"
        )));
    }
    let l_coord = oracle.coordinate_upper_curvature().to_vec();
    match oracle.objective() {
        Objective::Quadratic(q) => {
            let a = q.matrix();
            let (mu, l_global, eigen_exact) = if d <= EXACT_EIGEN_LIMIT {
                let (lo, hi) = linalg::sym_eigen_bounds(a);
                (lo, hi, true)
            } else {
                // Gershgorin: every eigenvalue lies in a disc around a
                // diagonal entry with the off-diagonal row sum as radius
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for i in 0..d {
                    let radius: f64 =
                        (0..d).filter(|&j| j != i).map(|j| a[(i, j)].abs()).sum();
                    lo = lo.min(a[(i, i)] - radius);
                    hi = hi.max(a[(i, i)] + radius);
                }
                (lo, hi, false)
            };
            Ok(ConstantsReport {
                objective: oracle.kind_name().into(),
                m_global: 0.0,
                m_coord: vec![0.0; d],
                l_global,
                l_coord,
                mu,
                c_third: 0.0,
                eigen_exact,
            })
        }
        Objective::Logistic(l) => {
            let n = l.labels().len() as f64;
            let c3 = 1.0 / (6.0 * 3f64.sqrt());
            let m_global = c3 / n * l.data().row_norms_cubed_sum();
            let m_coord = l.data().col_abs_cubed().mapv(|v| c3 / n * v).to_vec();
            let (top, eigen_exact) = gram_top_eigenvalue(l.data(), d);
            Ok(ConstantsReport {
                objective: oracle.kind_name().into(),
                m_global,
                m_coord,
                l_global: top / (4.0 * n) + l.lambda(),
                l_coord,
                mu: l.lambda(),
                c_third: c3,
                eigen_exact,
            })
        }
        Objective::LogSumExp(l) => {
            let sigma = l.sigma();
            let c3 = 2.0 / (sigma * sigma);
            let entries = l.data().row_entries();
            let mut max_row_cubed: f64 = 0.0;
            let mut max_coord_cubed = vec![0.0f64; d];
            for row in &entries {
                let norm_sq: f64 = row.iter().map(|(_, v)| v * v).sum();
                max_row_cubed = max_row_cubed.max(norm_sq.sqrt().powi(3));
                for &(j, v) in row {
                    max_coord_cubed[j] = max_coord_cubed[j].max(v.abs().powi(3));
                }
            }
            let (top, eigen_exact) = gram_top_eigenvalue(l.data(), d);
            Ok(ConstantsReport {
                objective: oracle.kind_name().into(),
                m_global: c3 * max_row_cubed,
                m_coord: max_coord_cubed.iter().map(|v| c3 * v).collect(),
                l_global: top / sigma,
                l_coord,
                mu: 0.0,
                c_third: c3,
                eigen_exact,
            })
        }
    }
}

/// Largest eigenvalue of AᵀA: exact for small d, else the Hölder bound
/// `‖A‖₁ ‖A‖_∞ ≥ ‖A‖₂²`.
fn gram_top_eigenvalue(data: &crate::matrix::DesignMatrix, d: usize) -> (f64, bool) {
    if d <= EXACT_EIGEN_LIMIT {
        let dense = data.to_dense();
        let gram = dense.t().dot(&dense);
        let (_, hi) = linalg::sym_eigen_bounds(&gram);
        (hi, true)
    } else {
        let entries = data.row_entries();
        let mut col_abs = vec![0.0f64; d];
        let mut max_row_abs: f64 = 0.0;
        for row in &entries {
            let mut row_abs = 0.0;
            for &(j, v) in row {
                col_abs[j] += v.abs();
                row_abs += v.abs();
            }
            max_row_abs = max_row_abs.max(row_abs);
        }
        let max_col_abs = col_abs.iter().cloned().fold(0.0, f64::max);
        (max_col_abs * max_row_abs, false)
    }
}

/// How a ζ value was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZetaMethod {
    /// Sampler admits a closed-form expectation (full or single-coordinate).
    ClosedForm,
    /// All subsets enumerated exactly.
    ExactEnumeration { subsets: usize },
    /// Sampled expectation; the error scales as 1/√trials.
    MonteCarlo { trials: usize, max_entry_stderr: f64 },
}

/// The expected-projection number of a sampler at one Hessian.
#[derive(Debug, Clone, Serialize)]
pub struct ZetaReport {
    /// `λ_min(H^{1/2} E[S (SᵀHS)⁻¹ Sᵀ] H^{1/2})`, the per-iteration
    /// contraction exponent of the expected gap in the locally quadratic
    /// regime. Equals τ/d for diagonal Hessians under uniform sampling and 1
    /// for the full sketch.
    pub zeta: f64,
    pub method: ZetaMethod,
    /// Point whose Hessian defined the projection.
    pub hessian_point: Vec<f64>,
}

fn spd_inverse(a: &Array2<f64>) -> Result<Array2<f64>> {
    let (lam, q) = linalg::sym_eigen(a);
    let scale = lam[lam.len() - 1].abs().max(1.0);
    if lam[0] <= 1e-14 * scale {
        return Err(Error::Numerical(format!(
            "sketch block is numerically singular (λ_min = {:.3e})",
            lam[0]
        )));
    }
    let mut out = Array2::zeros(a.dim());
    for (i, col) in q.columns().into_iter().enumerate() {
        let c = col.to_owned();
        for s in 0..a.nrows() {
            for t in 0..a.ncols() {
                out[(s, t)] += c[s] * c[t] / lam[i];
            }
        }
    }
    Ok(out)
}

fn sketch_inverse_term(hess: &Array2<f64>, indices: &[usize]) -> Result<Array2<f64>> {
    let tau = indices.len();
    let mut block = Array2::zeros((tau, tau));
    for (s, &j) in indices.iter().enumerate() {
        for (t, &k) in indices.iter().enumerate() {
            block[(s, t)] = hess[(j, k)];
        }
    }
    spd_inverse(&block)
}

fn binomial_at_most(d: usize, tau: usize, limit: f64) -> Option<usize> {
    let mut c = 1.0f64;
    for i in 0..tau {
        c *= (d - i) as f64 / (i + 1) as f64;
        if c > limit {
            return None;
        }
    }
    Some(c.round() as usize)
}

/// `E[S (SᵀHS)⁻¹ Sᵀ]` for a sampler at a fixed Hessian, with the method used.
///
/// Uniform subset samplers are enumerated exactly when the subset count is at
/// most 10⁶ and sampled otherwise (`trials` draws seeded from the sampler's
/// seed); the full and single-coordinate samplers have closed forms.
pub fn expected_sketch_inverse(
    hess: &Array2<f64>,
    sampler: &SamplerSpec,
    trials: usize,
) -> Result<(Array2<f64>, ZetaMethod)> {
    let d = hess.nrows();
    assert_eq!(hess.ncols(), d, "Hessian must be square");
    sampler.validate(d)?;
    match &sampler.kind {
        SamplerKind::Full => Ok((spd_inverse(hess)?, ZetaMethod::ClosedForm)),
        SamplerKind::SingleWeighted { probabilities } => {
            let mut e = Array2::zeros((d, d));
            for j in 0..d {
                if hess[(j, j)] <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "Hessian diagonal entry {j} is not positive"
                    )));
                }
                e[(j, j)] = probabilities[j] / hess[(j, j)];
            }
            Ok((e, ZetaMethod::ClosedForm))
        }
        SamplerKind::UniformSubset { tau } => {
            if let Some(count) = binomial_at_most(d, *tau, ENUMERATION_LIMIT) {
                let mut e = Array2::zeros((d, d));
                for subset in (0..d).combinations(*tau) {
                    let inv = sketch_inverse_term(hess, &subset)?;
                    for (s, &j) in subset.iter().enumerate() {
                        for (t, &k) in subset.iter().enumerate() {
                            e[(j, k)] += inv[(s, t)];
                        }
                    }
                }
                e.mapv_inplace(|v| v / count as f64);
                Ok((e, ZetaMethod::ExactEnumeration { subsets: count }))
            } else {
                if trials == 0 {
                    return Err(Error::Config(
                        "subset space too large to enumerate; provide a positive trial count"
                            .into(),
                    ));
                }
                let mut rng = rng::seeded(sampler.seed);
                let mut mean = Array2::<f64>::zeros((d, d));
                let mut m2 = Array2::<f64>::zeros((d, d));
                for t in 1..=trials {
                    let sketch = sample_sketch(sampler, d, &mut rng)?;
                    let inv = sketch_inverse_term(hess, sketch.indices())?;
                    let mut term = Array2::zeros((d, d));
                    for (s, &j) in sketch.indices().iter().enumerate() {
                        for (u, &k) in sketch.indices().iter().enumerate() {
                            term[(j, k)] = inv[(s, u)];
                        }
                    }
                    // Welford update per entry
                    let delta = &term - &mean;
                    mean.scaled_add(1.0 / t as f64, &delta);
                    let delta2 = &term - &mean;
                    m2 += &(&delta * &delta2);
                }
                let denom = (trials.max(2) - 1) as f64 * trials as f64;
                let max_m2 = m2.iter().fold(0.0f64, |acc, &v| acc.max(v));
                let max_entry_stderr = (max_m2 / denom).max(0.0).sqrt();
                Ok((mean, ZetaMethod::MonteCarlo { trials, max_entry_stderr }))
            }
        }
    }
}

/// ζ of a sampler at the Hessian of the oracle's smooth part at `state`.
///
/// Requires the Hessian to be positive definite on every sampleable sketch.
/// `trials` only matters when the sampler needs Monte Carlo estimation.
pub fn compute_zeta(
    oracle: &Oracle,
    state: &IterateState,
    sampler: &SamplerSpec,
    trials: usize,
) -> Result<ZetaReport> {
    let hess = oracle.full_hessian(state);
    let (expectation, method) = expected_sketch_inverse(&hess, sampler, trials)?;
    let root = linalg::sym_sqrt(&hess)?;
    let projected = root.dot(&expectation).dot(&root);
    let (zeta, _) = linalg::sym_eigen_bounds(&projected);
    Ok(ZetaReport { zeta, method, hessian_point: state.x.to_vec() })
}

/// Global-rate envelope for the expected gap of uniform-sketch runs.
///
/// For iteration k ≥ 1 with dimension d, sketch size τ, smoothness L, third
/// derivative bound M, initial gap Δ₀, and trajectory radius R:
///
/// ```text
/// bound(k) = (d−τ)/τ · 4.5 L R² / k  +  (d/τ)² · 9 M R³ / k²  +  Δ₀ / (1 + ¼ (τk/d)³)
/// ```
///
/// `bound(0)` is `Δ₀`. The envelope is meaningful for the average of many
/// seeds; single runs fluctuate around it.
pub fn expected_gap_bound(
    d: usize,
    tau: usize,
    l_global: f64,
    m_global: f64,
    initial_gap: f64,
    radius: f64,
    ks: &[usize],
) -> Vec<f64> {
    let df = d as f64;
    let tf = tau as f64;
    ks.iter()
        .map(|&k| {
            if k == 0 {
                return initial_gap;
            }
            let kf = k as f64;
            let lin = (df - tf) / tf * 4.5 * l_global * radius * radius / kf;
            let quad = (df / tf).powi(2) * 9.0 * m_global * radius.powi(3) / (kf * kf);
            let geo = initial_gap / (1.0 + 0.25 * (tf * kf / df).powi(3));
            lin + quad + geo
        })
        .collect()
}

/// Compares an observed expected-gap series against the rate envelope.
#[derive(Debug, Clone, Serialize)]
pub struct RateCheck {
    pub ks: Vec<usize>,
    pub observed: Vec<f64>,
    pub bound: Vec<f64>,
    /// Index of the first trace point whose mean gap exceeds the envelope.
    pub first_violation: Option<usize>,
    /// True when the radius came from observed iterates, which understates
    /// the sublevel-set radius the theory is stated with.
    pub radius_is_estimate: bool,
}

/// Evaluates the envelope on a gap series. `observed[i]` is the mean gap at
/// iteration `ks[i]`.
pub fn check_gap_series(
    d: usize,
    tau: usize,
    l_global: f64,
    m_global: f64,
    radius: f64,
    radius_is_estimate: bool,
    ks: &[usize],
    observed: &[f64],
) -> RateCheck {
    assert_eq!(ks.len(), observed.len());
    let initial_gap = observed.first().copied().unwrap_or(0.0);
    let bound = expected_gap_bound(d, tau, l_global, m_global, initial_gap, radius, ks);
    let first_violation = ks
        .iter()
        .zip(observed.iter().zip(bound.iter()))
        .position(|(_, (obs, b))| obs > b);
    RateCheck {
        ks: ks.to_vec(),
        observed: observed.to_vec(),
        bound,
        first_violation,
        radius_is_estimate,
    }
}

/// Newton decrement `√(∇F(x)ᵀ ∇²F(x)⁻¹ ∇F(x))` of the composite objective.
/// Defined for smooth regularizers only.
pub fn newton_decrement(oracle: &Oracle, state: &IterateState) -> Result<f64> {
    let mut g = oracle.full_gradient(state);
    let mut h = oracle.full_hessian(state);
    match *oracle.regularizer() {
        RegularizerSpec::None => {}
        RegularizerSpec::SquaredL2 { lambda } => {
            g.scaled_add(lambda, &state.x);
            for i in 0..h.nrows() {
                h[(i, i)] += lambda;
            }
        }
        RegularizerSpec::L1 { .. } => {
            return Err(Error::Unsupported(
                "the Newton decrement needs a twice-differentiable objective".into(),
            ))
        }
    }
    let sol = linalg::solve_spd(&h, &g)?;
    Ok(g.dot(&sol).max(0.0).sqrt())
}

/// One check of the cubic upper bound `f(x+Sh) ≤ f(x) + ⟨g,h⟩ + ½⟨Hh,h⟩ +
/// (M/6)‖h‖³` on the smooth part.
#[derive(Debug, Clone)]
pub struct CubicBoundCheck {
    /// f(x + Sh), recomputed from scratch.
    pub actual: f64,
    /// The model's prediction at h.
    pub model: f64,
    /// Whether actual ≤ model up to a relative slack of 1e-10.
    pub holds: bool,
}

/// Evaluates the cubic bound at one sketch and step.
pub fn verify_cubic_bound(
    oracle: &Oracle,
    state: &IterateState,
    sketch: &SketchSample,
    m: f64,
    h: &ArrayView1<f64>,
) -> CubicBoundCheck {
    let g = oracle.subspace_gradient(state, sketch);
    let hess = oracle.subspace_hessian(state, sketch);
    let r = h.dot(h).sqrt();
    let model =
        state.f_value + g.dot(h) + 0.5 * h.dot(&hess.dot(h)) + m / 6.0 * r.powi(3);
    let mut trial = state.clone();
    oracle.apply_update(&mut trial, sketch, h);
    let actual = trial.f_value;
    let holds = actual <= model + 1e-10 * (1.0 + state.f_value.abs());
    CubicBoundCheck { actual, model, holds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::DesignMatrix;
    use crate::oracle::{LogisticObjective, QuadraticObjective};
    use approx::assert_abs_diff_eq;
    use ndarray::{array, Array1};
    use rand::Rng;

    fn random_logistic(n: usize, d: usize, lambda: f64, seed: u64) -> Oracle {
        let mut rng = rng::seeded(seed);
        let a = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        let labels = Array1::from_shape_fn(n, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        Oracle::logistic(LogisticObjective::new(DesignMatrix::Dense(a), labels, lambda).unwrap())
    }

    fn random_spd(d: usize, seed: u64) -> Array2<f64> {
        let mut rng = rng::seeded(seed);
        let b = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
        let mut a = b.t().dot(&b);
        for i in 0..d {
            a[(i, i)] += 0.5;
        }
        a
    }

    /// Third directional derivative by central differences of the Hessian
    /// quadratic form: an independent check of the m-constants.
    fn third_directional(oracle: &Oracle, x: &Array1<f64>, u: &Array1<f64>) -> f64 {
        let eps = 1e-5;
        let quad_form = |shift: f64| -> f64 {
            let point = x + &(shift * u);
            let st = oracle.init_state(point);
            let h = oracle.full_hessian(&st);
            u.dot(&h.dot(u))
        };
        (quad_form(eps) - quad_form(-eps)) / (2.0 * eps)
    }

    #[test]
    fn logistic_third_derivative_bounds_hold() {
        let oracle = random_logistic(25, 6, 0.0, 9);
        let report = estimate_constants(&oracle).unwrap();
        let mut rng = rng::seeded(33);
        for _ in 0..40 {
            let x = Array1::from_shape_fn(6, |_| rng.random_range(-2.0f64..2.0));
            let u = {
                let v = Array1::from_shape_fn(6, |_| rng.random_range(-1.0f64..1.0));
                let n = v.dot(&v).sqrt();
                v.mapv(|t| t / n)
            };
            let d3 = third_directional(&oracle, &x, &u).abs();
            assert!(
                d3 <= report.m_global * (1.0 + 1e-4) + 1e-7,
                "directional third derivative {d3} exceeds bound {}",
                report.m_global
            );
        }
        // coordinate directions against the per-coordinate table
        for j in 0..6 {
            let mut u = Array1::zeros(6);
            u[j] = 1.0;
            let x = Array1::from_shape_fn(6, |_| rng.random_range(-2.0..2.0));
            let d3 = third_directional(&oracle, &x, &u).abs();
            assert!(
                d3 <= report.m_coord[j] * (1.0 + 1e-4) + 1e-7,
                "coordinate {j}: {d3} > {}",
                report.m_coord[j]
            );
        }
    }

    #[test]
    fn sign_matrix_constant_ratio_is_d_to_three_halves() {
        let mut rng = rng::seeded(4);
        let (n, d) = (30, 16);
        let a = Array2::from_shape_fn((n, d), |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        let labels = Array1::from_shape_fn(n, |_| if rng.random::<bool>() { 1.0 } else { -1.0 });
        let oracle = Oracle::logistic(
            LogisticObjective::new(DesignMatrix::Dense(a), labels, 0.0).unwrap(),
        );
        let report = estimate_constants(&oracle).unwrap();
        let max_coord = report.m_coord.iter().cloned().fold(0.0, f64::max);
        assert_abs_diff_eq!(
            report.m_global / max_coord,
            (d as f64).powf(1.5),
            epsilon = 1e-9
        );
    }

    #[test]
    fn quadratic_constants_are_exact() {
        let a = random_spd(8, 2);
        let oracle = Oracle::quadratic(QuadraticObjective::new(a.clone(), Array1::zeros(8)).unwrap());
        let report = estimate_constants(&oracle).unwrap();
        assert_eq!(report.m_global, 0.0);
        assert!(report.eigen_exact);
        let (lo, hi) = linalg::sym_eigen_bounds(&a);
        assert_abs_diff_eq!(report.mu, lo, epsilon = 1e-12);
        assert_abs_diff_eq!(report.l_global, hi, epsilon = 1e-12);
        for j in 0..8 {
            assert_abs_diff_eq!(report.l_coord[j], a[(j, j)], epsilon = 1e-15);
        }
    }

    #[test]
    fn zeta_closed_forms() {
        // full sketch projects exactly: ζ = 1
        let h = random_spd(5, 7);
        let (e, method) = expected_sketch_inverse(&h, &SamplerSpec::full(0), 0).unwrap();
        assert_eq!(method, ZetaMethod::ClosedForm);
        let root = linalg::sym_sqrt(&h).unwrap();
        let p = root.dot(&e).dot(&root);
        let (lo, hi) = linalg::sym_eigen_bounds(&p);
        assert_abs_diff_eq!(lo, 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(hi, 1.0, epsilon = 1e-9);

        // uniform single coordinates on a diagonal Hessian: ζ = 1/d
        let diag = Array2::from_diag(&array![0.5, 2.0, 7.0]);
        let oracle = Oracle::quadratic(
            QuadraticObjective::new(diag, Array1::zeros(3)).unwrap(),
        );
        let state = oracle.init_state(Array1::zeros(3));
        let report = compute_zeta(&oracle, &state, &SamplerSpec::uniform(1, 0), 0).unwrap();
        assert_abs_diff_eq!(report.zeta, 1.0 / 3.0, epsilon = 1e-10);
        assert!(matches!(report.method, ZetaMethod::ExactEnumeration { subsets: 3 }));
    }

    #[test]
    fn zeta_single_weighted_matches_manual_expectation() {
        let h = random_spd(4, 11);
        let probs = vec![0.4, 0.3, 0.2, 0.1];
        let spec = SamplerSpec::single_weighted(probs.clone(), 0);
        let (e, method) = expected_sketch_inverse(&h, &spec, 0).unwrap();
        assert_eq!(method, ZetaMethod::ClosedForm);
        for j in 0..4 {
            assert_abs_diff_eq!(e[(j, j)], probs[j] / h[(j, j)], epsilon = 1e-15);
        }
    }

    #[test]
    fn monte_carlo_zeta_agrees_with_enumeration() {
        let h = random_spd(6, 3);
        let exact = {
            let (e, m) = expected_sketch_inverse(&h, &SamplerSpec::uniform(2, 5), 0).unwrap();
            assert!(matches!(m, ZetaMethod::ExactEnumeration { subsets: 15 }));
            e
        };
        // force the sampled path through a large trial budget on the same
        // sampler by shrinking the enumeration limit is not possible from
        // here, so sample manually and compare the estimates entrywise
        let spec = SamplerSpec::uniform(2, 5);
        let mut rng = rng::seeded(spec.seed);
        let mut mean = Array2::<f64>::zeros((6, 6));
        let trials = 40_000;
        for t in 1..=trials {
            let sketch = sample_sketch(&spec, 6, &mut rng).unwrap();
            let inv = sketch_inverse_term(&h, sketch.indices()).unwrap();
            let mut term = Array2::zeros((6, 6));
            for (s, &j) in sketch.indices().iter().enumerate() {
                for (u, &k) in sketch.indices().iter().enumerate() {
                    term[(j, k)] = inv[(s, u)];
                }
            }
            let delta = &term - &mean;
            mean.scaled_add(1.0 / t as f64, &delta);
        }
        for (a, b) in mean.iter().zip(exact.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 0.05);
        }
    }

    #[test]
    fn gap_bound_matches_hand_computation() {
        // d=10, τ=2, L=2, M=1, Δ₀=10, R=3, k=5:
        //   (8/2)·4.5·2·9/5 = 64.8
        //   (10/2)²·9·1·27/25 = 243
        //   10/(1 + ¼·1³) = 8
        let bound = expected_gap_bound(10, 2, 2.0, 1.0, 10.0, 3.0, &[0, 5]);
        assert_abs_diff_eq!(bound[0], 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bound[1], 315.8, epsilon = 1e-9);
    }

    #[test]
    fn gap_series_check_flags_violations() {
        let ks = vec![0, 10, 100];
        let fine = vec![10.0, 5.0, 0.1];
        let check = check_gap_series(10, 2, 2.0, 1.0, 3.0, true, &ks, &fine);
        assert_eq!(check.first_violation, None);
        assert!(check.radius_is_estimate);
        let bad = vec![10.0, 1e9, 0.1];
        let check = check_gap_series(10, 2, 2.0, 1.0, 3.0, false, &ks, &bad);
        assert_eq!(check.first_violation, Some(1));
    }

    #[test]
    fn newton_decrement_quadratic_identity() {
        // at x = x* + e the decrement is √(eᵀAe)
        let a = random_spd(6, 13);
        let rhs = Array1::from_shape_fn(6, |i| i as f64 - 2.0);
        let xstar = linalg::solve_spd(&a, &rhs).unwrap();
        let oracle = Oracle::quadratic(QuadraticObjective::new(a.clone(), rhs).unwrap());
        let e = Array1::from_shape_fn(6, |i| 0.1 * (i as f64 + 1.0));
        let state = oracle.init_state(&xstar + &e);
        let lambda = newton_decrement(&oracle, &state).unwrap();
        assert_abs_diff_eq!(lambda, e.dot(&a.dot(&e)).sqrt(), epsilon = 1e-8);
    }

    #[test]
    fn cubic_bound_holds_with_reported_constant() {
        let oracle = random_logistic(30, 8, 0.05, 21);
        let report = estimate_constants(&oracle).unwrap();
        let mut rng = rng::seeded(55);
        for _ in 0..60 {
            let x = Array1::from_shape_fn(8, |_| rng.random_range(-1.5..1.5));
            let state = oracle.init_state(x);
            let tau = rng.random_range(1..=4);
            let spec = SamplerSpec::uniform(tau, 0);
            let sketch = sample_sketch(&spec, 8, &mut rng).unwrap();
            let h = Array1::from_shape_fn(tau, |_| rng.random_range(-2.0..2.0));
            let check = verify_cubic_bound(&oracle, &state, &sketch, report.m_global, &h.view());
            assert!(
                check.holds,
                "bound failed: actual {} model {}",
                check.actual, check.model
            );
        }
    }

    #[test]
    fn constants_report_rejects_oversized_problems() {
        let mut rng = rng::seeded(1);
        let a = Array2::from_shape_fn((10, 2001), |_| rng.random_range(-1.0..1.0));
        let labels = Array1::from_elem(10, 1.0);
        let oracle = Oracle::logistic(
            LogisticObjective::new(DesignMatrix::Dense(a), labels, 0.1).unwrap(),
        );
        assert!(matches!(estimate_constants(&oracle), Err(Error::Unsupported(_))));
    }
}
