//! Coordinate sketches and their samplers.
//!
//! A sketch selects τ distinct coordinates of R^d; the corresponding sketch
//! matrix `S = I[:, indices]` has orthonormal columns, so `‖S h‖ = ‖h‖` and the
//! subspace model lives in the same metric as the full space. Indices are kept
//! sorted ascending as the canonical form.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RunRng;

/// A drawn coordinate subset (sorted, distinct) for a problem of dimension d.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SketchSample {
    indices: Vec<usize>,
    dim: usize,
}

impl SketchSample {
    /// Validates and canonicalizes an index set: sorts ascending, rejects
    /// duplicates, out-of-range indices, and empty sets.
    pub fn new(mut indices: Vec<usize>, dim: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::Config("sketch must select at least one coordinate".into()));
        }
        indices.sort_unstable();
        for pair in indices.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::Config(format!("duplicate sketch index {}", pair[0])));
            }
        }
        if *indices.last().unwrap() >= dim {
            return Err(Error::Config(format!(
                "sketch index {} out of range for dimension {dim}",
                indices.last().unwrap()
            )));
        }
        Ok(SketchSample { indices, dim })
    }

    pub fn full(dim: usize) -> Self {
        SketchSample { indices: (0..dim).collect(), dim }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn tau(&self) -> usize {
        self.indices.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_full(&self) -> bool {
        self.tau() == self.dim
    }
}

/// Distribution the per-iteration sketch is drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// τ-subsets of {0..d}, uniform over all subsets of that size.
    UniformSubset { tau: usize },
    /// Single coordinate with explicit probabilities (importance sampling).
    SingleWeighted { probabilities: Vec<f64> },
    /// The deterministic full sketch (τ = d).
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    /// Base seed for standalone sampling (projection estimates, ζ trials).
    /// Solver runs draw from the run seed instead so that the seed list in a
    /// benchmark config governs every random choice.
    pub seed: u64,
}

impl SamplerSpec {
    pub fn uniform(tau: usize, seed: u64) -> Self {
        SamplerSpec { kind: SamplerKind::UniformSubset { tau }, seed }
    }

    pub fn single_weighted(probabilities: Vec<f64>, seed: u64) -> Self {
        SamplerSpec { kind: SamplerKind::SingleWeighted { probabilities }, seed }
    }

    pub fn full(seed: u64) -> Self {
        SamplerSpec { kind: SamplerKind::Full, seed }
    }

    /// Sketch size drawn by this sampler.
    pub fn tau(&self, dim: usize) -> usize {
        match &self.kind {
            SamplerKind::UniformSubset { tau } => *tau,
            SamplerKind::SingleWeighted { .. } => 1,
            SamplerKind::Full => dim,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match &self.kind {
            SamplerKind::UniformSubset { tau } => {
                if *tau == 0 || *tau > dim {
                    return Err(Error::Config(format!(
                        "uniform sketch size tau={tau} must be in 1..={dim}"
                    )));
                }
            }
            SamplerKind::SingleWeighted { probabilities } => {
                if probabilities.len() != dim {
                    return Err(Error::Config(format!(
                        "{} probabilities for dimension {dim}",
                        probabilities.len()
                    )));
                }
                if probabilities.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
                    return Err(Error::Config("probabilities must be nonnegative".into()));
                }
                let sum: f64 = probabilities.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("probabilities sum to {sum}, not 1")));
                }
            }
            SamplerKind::Full => {}
        }
        Ok(())
    }

    /// Whether every coordinate is sampled with equal marginal probability,
    /// i.e. `E[S Sᵀ] = (τ/d) I`. Weighted single-coordinate sampling breaks
    /// this on purpose.
    pub fn satisfies_uniformity(&self) -> bool {
        match &self.kind {
            SamplerKind::UniformSubset { .. } | SamplerKind::Full => true,
            SamplerKind::SingleWeighted { probabilities } => {
                let d = probabilities.len() as f64;
                probabilities.iter().all(|&p| (p - 1.0 / d).abs() <= 1e-12)
            }
        }
    }
}

/// Draws one sketch for a problem of dimension `dim`.
///
/// Uniform subsets use a partial Fisher-Yates pass, O(d) time and scratch;
/// weighted single coordinates invert the cumulative distribution on one
/// uniform draw; the full sampler consumes no randomness.
pub fn sample_sketch(spec: &SamplerSpec, dim: usize, rng: &mut RunRng) -> Result<SketchSample> {
    spec.validate(dim)?;
    match &spec.kind {
        SamplerKind::UniformSubset { tau } => {
            let mut pool: Vec<usize> = (0..dim).collect();
            for t in 0..*tau {
                let pick = rng.random_range(t..dim);
                pool.swap(t, pick);
            }
            let mut indices: Vec<usize> = pool[..*tau].to_vec();
            indices.sort_unstable();
            Ok(SketchSample { indices, dim })
        }
        SamplerKind::SingleWeighted { probabilities } => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = dim - 1;
            for (j, &p) in probabilities.iter().enumerate() {
                acc += p;
                if u < acc {
                    chosen = j;
                    break;
                }
            }
            Ok(SketchSample { indices: vec![chosen], dim })
        }
        SamplerKind::Full => Ok(SketchSample::full(dim)),
    }
}

/// Monte Carlo estimate of `E[S (SᵀS)⁻¹ Sᵀ]` over `trials` draws.
///
/// For coordinate sketches each term is the diagonal indicator of the drawn
/// subset, so the estimate is diagonal with entry j equal to the empirical
/// frequency of coordinate j. Under a uniformity-satisfying sampler the exact
/// expectation is `(τ/d) I`.
pub fn empirical_projection(
    spec: &SamplerSpec,
    dim: usize,
    trials: usize,
    rng: &mut RunRng,
) -> Result<Array2<f64>> {
    spec.validate(dim)?;
    let mut counts = vec![0u64; dim];
    for _ in 0..trials {
        let sk = sample_sketch(spec, dim, rng)?;
        for &j in sk.indices() {
            counts[j] += 1;
        }
    }
    let mut out = Array2::zeros((dim, dim));
    for (j, &c) in counts.iter().enumerate() {
        out[(j, j)] = c as f64 / trials as f64;
    }
    Ok(out)
}
