//! Stochastic subspace cubic Newton and first-order coordinate baselines.
//!
//! The central iteration samples a coordinate sketch `S`, builds the cubic
//! model
//!
//! ```text
//! T(h) = ⟨∇_S f(x), h⟩ + ½ ⟨∇²_S f(x) h, h⟩ + (M/6)‖h‖³ + ψ(x + S h)
//! ```
//!
//! over the sketched subspace, minimizes it exactly or iteratively, and steps
//! `x ← x + S h`. Because the model upper-bounds the objective along the
//! subspace whenever `M` dominates the local third derivative, every accepted
//! step decreases `F = f + ψ` monotonically; an adaptive scheme doubles and
//! halves `M` so no global constant needs to be known in advance.
//!
//! Module map:
//!
//! * [`oracle`]: objectives (quadratic, logistic, smoothed max) with cached
//!   residuals and O(nτ)/O(nτ²) subspace derivatives,
//! * [`sketch`]: coordinate samplers and the empirical projection law,
//! * [`cubic`]: subspace cubic models and their solvers (closed-form 1-D,
//!   eigendecomposition plus secular root for blocks, nonlinear CG for large
//!   blocks) plus the adaptive regularization loop,
//! * [`solver`]: full optimization drivers (subspace cubic Newton, coordinate
//!   descent, accelerated coordinate descent, subspace Newton with a fixed
//!   curvature bound) emitting per-iteration traces,
//! * [`theory`]: constant estimation, the condition-number functional ζ,
//!   model-bound checks, and the global rate certificate,
//! * [`data`]: LIBSVM parsing, column normalization, and synthetic generators.

pub mod cubic;
pub mod data;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod oracle;
pub mod rng;
pub mod sketch;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
