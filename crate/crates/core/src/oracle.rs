//! Objective oracles with cached linear residuals.
//!
//! Each oracle exposes exactly the quantities a subspace method touches per
//! iteration: the restriction of the gradient and Hessian to a coordinate
//! sketch, the objective value from cached per-example residuals, and an
//! incremental state update after a subspace step. For a sketch of size τ over
//! n examples the per-iteration costs are O(nτ) for the gradient, O(nτ²) for
//! the Hessian block, and O(nτ) for the update; nothing on the hot path is
//! O(nd).
//!
//! Supported objectives:
//!
//! * quadratic: `f(x) = ½ xᵀA x − ⟨b, x⟩` with symmetric PSD `A` (the state
//!   caches `A x` instead of per-example residuals),
//! * regularized logistic loss: `f(x) = (1/n) Σ log(1 + exp(−bᵢ⟨aᵢ,x⟩)) +
//!   (λ/2)‖x‖²` with labels in {−1, +1} (the ridge term is part of `f`, not of
//!   the separable regularizer),
//! * smoothed max: `f(x) = σ log Σ exp((⟨aᵢ,x⟩ − bᵢ)/σ)`, evaluated with
//!   max-subtraction so large residuals never overflow.
//!
//! An optional separable term ψ(x) = Σⱼ ψⱼ(xⱼ) (none, squared ℓ2, or ℓ1) rides
//! on top; `psi_slice` restricts it to the sampled coordinates for the cubic
//! subproblem.

use ndarray::{Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::DesignMatrix;
use crate::sketch::SketchSample;

/// Separable regularizer ψ(x) = Σⱼ ψⱼ(xⱼ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegularizerSpec {
    #[default]
    None,
    SquaredL2 {
        lambda: f64,
    },
    L1 {
        lambda: f64,
    },
}

impl RegularizerSpec {
    pub fn is_none(&self) -> bool {
        matches!(self, RegularizerSpec::None)
    }

    /// ψⱼ evaluated at a single coordinate value.
    pub fn coord_value(&self, xj: f64) -> f64 {
        match *self {
            RegularizerSpec::None => 0.0,
            RegularizerSpec::SquaredL2 { lambda } => 0.5 * lambda * xj * xj,
            RegularizerSpec::L1 { lambda } => lambda * xj.abs(),
        }
    }

    /// ψ(x) over a full vector.
    pub fn value(&self, x: &ArrayView1<f64>) -> f64 {
        match self {
            RegularizerSpec::None => 0.0,
            _ => x.iter().map(|&v| self.coord_value(v)).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lambda = match *self {
            RegularizerSpec::None => return Ok(()),
            RegularizerSpec::SquaredL2 { lambda } | RegularizerSpec::L1 { lambda } => lambda,
        };
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("regularizer weight must be >= 0, got {lambda}")));
        }
        Ok(())
    }
}

/// The separable regularizer restricted to sampled coordinates: slot `t`
/// carries the 1-D function `h ↦ ψⱼ(xⱼ + h)` for the t-th sketched coordinate,
/// anchored at the current value of that coordinate.
#[derive(Debug, Clone)]
pub struct PsiSlice {
    pub reg: RegularizerSpec,
    /// Current coordinate values xⱼ for each slot.
    pub anchor: Vec<f64>,
}

impl PsiSlice {
    pub fn none(tau: usize) -> Self {
        PsiSlice { reg: RegularizerSpec::None, anchor: vec![0.0; tau] }
    }

    pub fn tau(&self) -> usize {
        self.anchor.len()
    }

    /// True when every ψⱼ is differentiable (kind none or squared ℓ2).
    pub fn is_smooth(&self) -> bool {
        !matches!(self.reg, RegularizerSpec::L1 { .. })
    }

    pub fn is_none(&self) -> bool {
        self.reg.is_none()
    }

    /// ψⱼ(xⱼ + h) for slot `t`.
    pub fn coord_value(&self, t: usize, h: f64) -> f64 {
        self.reg.coord_value(self.anchor[t] + h)
    }

    /// ψⱼ(xⱼ + h) − ψⱼ(xⱼ) for slot `t`.
    pub fn coord_decrement(&self, t: usize, h: f64) -> f64 {
        self.coord_value(t, h) - self.coord_value(t, 0.0)
    }

    /// Σₜ ψⱼ(xⱼ + hₜ) − ψⱼ(xⱼ): the regularizer change induced by a step.
    pub fn decrement(&self, h: &ArrayView1<f64>) -> f64 {
        assert_eq!(h.len(), self.tau());
        if self.is_none() {
            return 0.0;
        }
        h.iter().enumerate().map(|(t, &ht)| self.coord_decrement(t, ht)).sum()
    }
}

/// Quadratic objective `½ xᵀA x − ⟨b, x⟩` with symmetric PSD `A`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    matrix: Array2<f64>,
    rhs: Array1<f64>,
    /// Minimizer `A⁻¹ b` when the generator solved for it.
    pub known_solution: Option<Array1<f64>>,
}

impl QuadraticObjective {
    pub fn new(matrix: Array2<f64>, rhs: Array1<f64>) -> Result<Self> {
        let d = matrix.nrows();
        if matrix.ncols() != d || rhs.len() != d {
            return Err(Error::Config(format!(
                "quadratic objective needs square A and matching b: A is {}x{}, b has {}",
                matrix.nrows(),
                matrix.ncols(),
                rhs.len()
            )));
        }
        let scale = matrix.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..d {
            for j in (i + 1)..d {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-8 * scale {
                    return Err(Error::Config(format!(
                        "quadratic matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(QuadraticObjective { matrix, rhs, known_solution: None })
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn rhs(&self) -> &Array1<f64> {
        &self.rhs
    }
}

/// `(1/n) Σ log(1 + exp(−bᵢ⟨aᵢ,x⟩)) + (λ/2)‖x‖²` with labels in {−1, +1}.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    data: DesignMatrix,
    labels: Array1<f64>,
    lambda: f64,
}

impl LogisticObjective {
    pub fn new(data: DesignMatrix, labels: Array1<f64>, lambda: f64) -> Result<Self> {
        if labels.len() != data.nrows() {
            return Err(Error::Config(format!(
                "{} labels for {} rows",
                labels.len(),
                data.nrows()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&b| b != 1.0 && b != -1.0) {
            return Err(Error::Config(format!("logistic labels must be -1 or +1, got {bad}")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config(format!("ridge weight must be >= 0, got {lambda}")));
        }
        Ok(LogisticObjective { data, labels, lambda })
    }

    pub fn data(&self) -> &DesignMatrix {
        &self.data
    }

    pub fn labels(&self) -> &Array1<f64> {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// `σ log Σ exp((⟨aᵢ,x⟩ − bᵢ)/σ)`, a smooth approximation of
/// `maxᵢ(⟨aᵢ,x⟩ − bᵢ)` that sharpens as σ shrinks.
#[derive(Debug, Clone)]
pub struct LogSumExpObjective {
    data: DesignMatrix,
    offsets: Array1<f64>,
    sigma: f64,
}

impl LogSumExpObjective {
    pub fn new(data: DesignMatrix, offsets: Array1<f64>, sigma: f64) -> Result<Self> {
        if offsets.len() != data.nrows() {
            return Err(Error::Config(format!(
                "{} offsets for {} rows",
                offsets.len(),
                data.nrows()
            )));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Config(format!("smoothing sigma must be > 0, got {sigma}")));
        }
        Ok(LogSumExpObjective { data, offsets, sigma })
    }

    pub fn data(&self) -> &DesignMatrix {
        &self.data
    }

    pub fn offsets(&self) -> &Array1<f64> {
        &self.offsets
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// The smooth part `f` of the composite objective `F = f + ψ`.
#[derive(Debug, Clone)]
pub enum Objective {
    Quadratic(QuadraticObjective),
    Logistic(LogisticObjective),
    LogSumExp(LogSumExpObjective),
}

/// Iterate plus every cache needed to evaluate and update cheaply.
///
/// `residuals` holds `⟨aᵢ, x⟩` for the linear-model objectives and `A x` for
/// the quadratic one. `f_value`/`psi_value` always match `x` up to incremental
/// roundoff; `refresh` rebuilds them from scratch.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: Array1<f64>,
    pub residuals: Array1<f64>,
    pub f_value: f64,
    pub psi_value: f64,
    /// Cached ‖x‖² for the ridge term.
    x_sq_norm: f64,
    /// Solver iterations applied to reach this state.
    pub iteration: usize,
    /// Total coordinates processed (τ per accepted update; rolled-back trials
    /// do not count).
    pub coords_processed: usize,
}

impl IterateState {
    /// Composite objective value `F(x) = f(x) + ψ(x)` from caches.
    pub fn value(&self) -> f64 {
        self.f_value + self.psi_value
    }
}

/// Everything needed to undo one `apply_update` bit-for-bit.
#[derive(Debug, Clone)]
pub struct StateSnapshot {
    residuals: Array1<f64>,
    coords: Vec<(usize, f64)>,
    f_value: f64,
    psi_value: f64,
    x_sq_norm: f64,
    iteration: usize,
    coords_processed: usize,
}

/// Composite objective `F = f + ψ` with subspace derivative access.
#[derive(Debug, Clone)]
pub struct Oracle {
    objective: Objective,
    regularizer: RegularizerSpec,
}

fn stable_softplus(z: f64) -> f64 {
    // log(1 + e^z) without overflow on either tail
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn stable_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Oracle {
    pub fn new(objective: Objective, regularizer: RegularizerSpec) -> Result<Self> {
        regularizer.validate()?;
        Ok(Oracle { objective, regularizer })
    }

    pub fn quadratic(q: QuadraticObjective) -> Self {
        Oracle { objective: Objective::Quadratic(q), regularizer: RegularizerSpec::None }
    }

    pub fn logistic(l: LogisticObjective) -> Self {
        Oracle { objective: Objective::Logistic(l), regularizer: RegularizerSpec::None }
    }

    pub fn log_sum_exp(l: LogSumExpObjective) -> Self {
        Oracle { objective: Objective::LogSumExp(l), regularizer: RegularizerSpec::None }
    }

    pub fn with_regularizer(mut self, reg: RegularizerSpec) -> Result<Self> {
        reg.validate()?;
        self.regularizer = reg;
        Ok(self)
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn regularizer(&self) -> &RegularizerSpec {
        &self.regularizer
    }

    pub fn kind_name(&self) -> &'static str {
        match self.objective {
            Objective::Quadratic(_) => "quadratic",
            Objective::Logistic(_) => "logistic",
            Objective::LogSumExp(_) => "log_sum_exp",
        }
    }

    /// Problem dimension d.
    pub fn dim(&self) -> usize {
        match &self.objective {
            Objective::Quadratic(q) => q.matrix.nrows(),
            Objective::Logistic(l) => l.data.ncols(),
            Objective::LogSumExp(l) => l.data.ncols(),
        }
    }

    /// Number of residual terms (n for linear models, d for the quadratic).
    pub fn num_residuals(&self) -> usize {
        match &self.objective {
            Objective::Quadratic(q) => q.matrix.nrows(),
            Objective::Logistic(l) => l.data.nrows(),
            Objective::LogSumExp(l) => l.data.nrows(),
        }
    }

    /// Builds a state at `x0` with all caches computed from scratch.
    pub fn init_state(&self, x0: Array1<f64>) -> IterateState {
        assert_eq!(x0.len(), self.dim(), "x0 dimension mismatch");
        let residuals = match &self.objective {
            Objective::Quadratic(q) => q.matrix.dot(&x0),
            Objective::Logistic(l) => l.data.matvec(&x0.view()),
            Objective::LogSumExp(l) => l.data.matvec(&x0.view()),
        };
        let x_sq_norm = x0.dot(&x0);
        let psi_value = self.regularizer.value(&x0.view());
        let mut state = IterateState {
            x: x0,
            residuals,
            f_value: 0.0,
            psi_value,
            x_sq_norm,
            iteration: 0,
            coords_processed: 0,
        };
        state.f_value = self.smooth_value(&state);
        state
    }

    /// Smooth part f(x) from cached residuals, O(n).
    fn smooth_value(&self, state: &IterateState) -> f64 {
        match &self.objective {
            Objective::Quadratic(q) => 0.5 * state.x.dot(&state.residuals) - q.rhs.dot(&state.x),
            Objective::Logistic(l) => {
                let n = l.labels.len() as f64;
                let loss: f64 = state
                    .residuals
                    .iter()
                    .zip(l.labels.iter())
                    .map(|(&r, &b)| stable_softplus(-b * r))
                    .sum();
                loss / n + 0.5 * l.lambda * state.x_sq_norm
            }
            Objective::LogSumExp(l) => {
                let mut zmax = f64::NEG_INFINITY;
                for (r, b) in state.residuals.iter().zip(l.offsets.iter()) {
                    zmax = zmax.max((r - b) / l.sigma);
                }
                let sum: f64 = state
                    .residuals
                    .iter()
                    .zip(l.offsets.iter())
                    .map(|(&r, &b)| ((r - b) / l.sigma - zmax).exp())
                    .sum();
                l.sigma * (zmax + sum.ln())
            }
        }
    }

    /// Composite value `F(x)` from caches (O(1); the caches themselves are
    /// maintained at O(n) per update).
    pub fn value(&self, state: &IterateState) -> f64 {
        state.value()
    }

    /// Per-example weights for the linear-model gradient: the gradient is
    /// `Aᵀ w (+ λx)` with these weights.
    fn gradient_weights(&self, state: &IterateState) -> Array1<f64> {
        self.gradient_weights_at(&state.residuals.view())
    }

    /// Gradient weights from an arbitrary residual vector `A x`, so callers
    /// holding residual caches for auxiliary points (accelerated methods)
    /// avoid building a full state.
    pub(crate) fn gradient_weights_at(&self, residuals: &ArrayView1<f64>) -> Array1<f64> {
        match &self.objective {
            Objective::Quadratic(_) => unreachable!("quadratic gradient reads the Ax cache"),
            Objective::Logistic(l) => {
                let n = l.labels.len() as f64;
                Array1::from_iter(residuals.iter().zip(l.labels.iter()).map(|(&r, &b)| {
                    // d/dr of softplus(-b r) = -b * sigmoid(-b r)
                    -b * stable_sigmoid(-b * r) / n
                }))
            }
            Objective::LogSumExp(l) => self.softmax_weights_at(residuals, l),
        }
    }

    fn softmax_weights(&self, state: &IterateState, l: &LogSumExpObjective) -> Array1<f64> {
        self.softmax_weights_at(&state.residuals.view(), l)
    }

    fn softmax_weights_at(&self, residuals: &ArrayView1<f64>, l: &LogSumExpObjective) -> Array1<f64> {
        let mut zmax = f64::NEG_INFINITY;
        for (r, b) in residuals.iter().zip(l.offsets.iter()) {
            zmax = zmax.max((r - b) / l.sigma);
        }
        let mut w = Array1::from_iter(
            residuals
                .iter()
                .zip(l.offsets.iter())
                .map(|(&r, &b)| ((r - b) / l.sigma - zmax).exp()),
        );
        let sum = w.sum();
        w.mapv_inplace(|v| v / sum);
        w
    }

    /// Gradient of f restricted to the sketched coordinates, O(nτ).
    pub fn subspace_gradient(&self, state: &IterateState, sketch: &SketchSample) -> Array1<f64> {
        self.check_sketch(sketch);
        match &self.objective {
            Objective::Quadratic(q) => Array1::from_iter(
                sketch.indices().iter().map(|&j| state.residuals[j] - q.rhs[j]),
            ),
            Objective::Logistic(l) => {
                let w = self.gradient_weights(state);
                Array1::from_iter(
                    sketch
                        .indices()
                        .iter()
                        .map(|&j| l.data.col_dot(j, &w.view()) + l.lambda * state.x[j]),
                )
            }
            Objective::LogSumExp(l) => {
                let w = self.gradient_weights(state);
                Array1::from_iter(sketch.indices().iter().map(|&j| l.data.col_dot(j, &w.view())))
            }
        }
    }

    /// Hessian of f restricted to the sketched coordinates (τ×τ), O(nτ²).
    pub fn subspace_hessian(&self, state: &IterateState, sketch: &SketchSample) -> Array2<f64> {
        self.check_sketch(sketch);
        let idx = sketch.indices();
        match &self.objective {
            Objective::Quadratic(q) => {
                let tau = idx.len();
                let mut h = Array2::zeros((tau, tau));
                for (s, &j) in idx.iter().enumerate() {
                    for (t, &k) in idx.iter().enumerate() {
                        h[(s, t)] = q.matrix[(j, k)];
                    }
                }
                h
            }
            Objective::Logistic(l) => {
                let n = l.labels.len() as f64;
                let curvature = Array1::from_iter(state.residuals.iter().zip(l.labels.iter()).map(
                    |(&r, &b)| {
                        let s = stable_sigmoid(b * r);
                        // second derivative of softplus(-b r) in r; b² = 1
                        s * (1.0 - s) / n
                    },
                ));
                let cols = l.data.sub_columns(idx);
                let scaled = &cols * &curvature.view().insert_axis(Axis(1));
                let mut h = cols.t().dot(&scaled);
                for t in 0..idx.len() {
                    h[(t, t)] += l.lambda;
                }
                h
            }
            Objective::LogSumExp(l) => {
                let w = self.softmax_weights(state, l);
                let cols = l.data.sub_columns(idx);
                let scaled = &cols * &w.view().insert_axis(Axis(1));
                let mut h = cols.t().dot(&scaled);
                let u = cols.t().dot(&w);
                for s in 0..idx.len() {
                    for t in 0..idx.len() {
                        h[(s, t)] = (h[(s, t)] - u[s] * u[t]) / l.sigma;
                    }
                }
                h
            }
        }
    }

    /// Full gradient ∇f(x), O(nd). Used for trace diagnostics and reference
    /// solves, never on the per-iteration hot path.
    pub fn full_gradient(&self, state: &IterateState) -> Array1<f64> {
        match &self.objective {
            Objective::Quadratic(q) => &state.residuals - &q.rhs,
            Objective::Logistic(l) => {
                let w = self.gradient_weights(state);
                let mut g = l.data.t_matvec(&w.view());
                g.scaled_add(l.lambda, &state.x);
                g
            }
            Objective::LogSumExp(l) => {
                let w = self.gradient_weights(state);
                l.data.t_matvec(&w.view())
            }
        }
    }

    /// Full Hessian ∇²f(x) as a dense d×d matrix. Desk-scale only.
    pub fn full_hessian(&self, state: &IterateState) -> Array2<f64> {
        let all: Vec<usize> = (0..self.dim()).collect();
        let full = SketchSample::new(all, self.dim()).expect("full index set is a valid sketch");
        self.subspace_hessian(state, &full)
    }

    /// Hessian-vector product `∇²f(x) v` in O(nd) without forming the matrix,
    /// for matrix-free full-dimensional solves.
    pub fn full_hvp(&self, state: &IterateState, v: &ArrayView1<f64>) -> Array1<f64> {
        assert_eq!(v.len(), self.dim());
        match &self.objective {
            Objective::Quadratic(q) => q.matrix.dot(v),
            Objective::Logistic(l) => {
                let n = l.labels.len() as f64;
                let mut av = l.data.matvec(v);
                for (avi, (&r, &b)) in av.iter_mut().zip(state.residuals.iter().zip(&l.labels)) {
                    let s = stable_sigmoid(b * r);
                    *avi *= s * (1.0 - s) / n;
                }
                let mut out = l.data.t_matvec(&av.view());
                out.scaled_add(l.lambda, v);
                out
            }
            Objective::LogSumExp(l) => {
                let w = self.softmax_weights(state, l);
                let mut av = l.data.matvec(v);
                av *= &w;
                let mut out = l.data.t_matvec(&av.view());
                let u = l.data.t_matvec(&w.view());
                let uv = u.dot(v);
                out.scaled_add(-uv, &u);
                out.mapv_inplace(|t| t / l.sigma);
                out
            }
        }
    }

    /// The separable regularizer restricted to the sketch, anchored at x.
    pub fn psi_slice(&self, state: &IterateState, sketch: &SketchSample) -> PsiSlice {
        self.check_sketch(sketch);
        PsiSlice {
            reg: self.regularizer,
            anchor: sketch.indices().iter().map(|&j| state.x[j]).collect(),
        }
    }

    /// Applies `x ← x + S h` and refreshes every cache incrementally in O(nτ).
    pub fn apply_update(
        &self,
        state: &mut IterateState,
        sketch: &SketchSample,
        h: &ArrayView1<f64>,
    ) {
        self.check_sketch(sketch);
        assert_eq!(h.len(), sketch.tau(), "step dimension must match sketch size");
        for (t, &j) in sketch.indices().iter().enumerate() {
            let old = state.x[j];
            let new = old + h[t];
            state.psi_value += self.regularizer.coord_value(new) - self.regularizer.coord_value(old);
            state.x_sq_norm += new * new - old * old;
            state.x[j] = new;
            match &self.objective {
                Objective::Quadratic(q) => {
                    // residuals cache A x
                    for i in 0..q.matrix.nrows() {
                        state.residuals[i] += h[t] * q.matrix[(i, j)];
                    }
                }
                Objective::Logistic(l) => l.data.col_axpy(j, h[t], &mut state.residuals),
                Objective::LogSumExp(l) => l.data.col_axpy(j, h[t], &mut state.residuals),
            }
        }
        state.f_value = self.smooth_value(state);
        state.iteration += 1;
        state.coords_processed += sketch.tau();
    }

    /// Captures what `apply_update` over `sketch` would touch, for rollback.
    pub fn snapshot(&self, state: &IterateState, sketch: &SketchSample) -> StateSnapshot {
        StateSnapshot {
            residuals: state.residuals.clone(),
            coords: sketch.indices().iter().map(|&j| (j, state.x[j])).collect(),
            f_value: state.f_value,
            psi_value: state.psi_value,
            x_sq_norm: state.x_sq_norm,
            iteration: state.iteration,
            coords_processed: state.coords_processed,
        }
    }

    /// Restores a snapshot taken over the same sketch, bit-for-bit.
    pub fn restore(&self, state: &mut IterateState, snapshot: &StateSnapshot) {
        state.residuals.assign(&snapshot.residuals);
        for &(j, v) in &snapshot.coords {
            state.x[j] = v;
        }
        state.f_value = snapshot.f_value;
        state.psi_value = snapshot.psi_value;
        state.x_sq_norm = snapshot.x_sq_norm;
        state.iteration = snapshot.iteration;
        state.coords_processed = snapshot.coords_processed;
    }

    /// Rebuilds all caches from x, clearing incremental drift.
    pub fn refresh(&self, state: &mut IterateState) {
        let mut fresh = self.init_state(state.x.clone());
        fresh.iteration = state.iteration;
        fresh.coords_processed = state.coords_processed;
        *state = fresh;
    }

    /// Objective value at an arbitrary point, from scratch.
    pub fn value_at(&self, x: &Array1<f64>) -> f64 {
        self.init_state(x.clone()).value()
    }

    /// `SᵀLS` for a global curvature upper bound `L ⪰ ∇²f(x)` for all x:
    /// `A` for the quadratic, `(1/(4n))AᵀA + λI` for logistic, `(1/σ)AᵀA`
    /// for the smoothed max. O(nτ²).
    pub fn upper_curvature_block(&self, sketch: &SketchSample) -> Array2<f64> {
        self.check_sketch(sketch);
        let idx = sketch.indices();
        match &self.objective {
            Objective::Quadratic(q) => {
                let tau = idx.len();
                let mut h = Array2::zeros((tau, tau));
                for (s, &j) in idx.iter().enumerate() {
                    for (t, &k) in idx.iter().enumerate() {
                        h[(s, t)] = q.matrix[(j, k)];
                    }
                }
                h
            }
            Objective::Logistic(l) => {
                let cols = l.data.sub_columns(idx);
                let mut h = cols.t().dot(&cols);
                h.mapv_inplace(|v| v / (4.0 * l.labels.len() as f64));
                for t in 0..idx.len() {
                    h[(t, t)] += l.lambda;
                }
                h
            }
            Objective::LogSumExp(l) => {
                let cols = l.data.sub_columns(idx);
                let mut h = cols.t().dot(&cols);
                h.mapv_inplace(|v| v / l.sigma);
                h
            }
        }
    }

    /// Diagonal of the curvature upper bound: per-coordinate smoothness
    /// constants L_j.
    pub fn coordinate_upper_curvature(&self) -> Array1<f64> {
        match &self.objective {
            Objective::Quadratic(q) => q.matrix.diag().to_owned(),
            Objective::Logistic(l) => {
                let mut lj = l.data.col_sq_norms();
                let n = l.labels.len() as f64;
                lj.mapv_inplace(|v| v / (4.0 * n) + l.lambda);
                lj
            }
            Objective::LogSumExp(l) => {
                let mut lj = l.data.col_sq_norms();
                lj.mapv_inplace(|v| v / l.sigma);
                lj
            }
        }
    }

    /// A strong-convexity lower bound μ for f: λ for logistic, λ_min(A) for
    /// the quadratic, 0 for the smoothed max.
    pub fn strong_convexity_bound(&self) -> f64 {
        match &self.objective {
            Objective::Quadratic(q) => linalg::sym_eigen_bounds(&q.matrix).0,
            Objective::Logistic(l) => l.lambda,
            Objective::LogSumExp(_) => 0.0,
        }
    }

    fn check_sketch(&self, sketch: &SketchSample) {
        assert_eq!(
            sketch.dim(),
            self.dim(),
            "sketch was drawn for dimension {} but the oracle has dimension {}",
            sketch.dim(),
            self.dim()
        );
    }
}
