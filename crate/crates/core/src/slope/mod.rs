//! Sorted-l1 machinery and the square-root SLOPE pilot estimator.
//!
//! The pilot minimises `||Y - X b|| / sqrt(m) + 2 |b|_*` where
//! `|b|_* = sum_j lambda_j |b|_(j)` pairs the non-increasing weights with the
//! non-increasing rearrangement of `|b|`.

mod prox;
mod solver;

pub use prox::prox_sorted_l1;
pub use solver::{slope_solve, sqrt_slope_solve, SlopeFit, SqrtSlopeFit};

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weight constant `A = 16 + 4 sqrt(2)` sufficient under Gaussian noise.
pub const THEORY_A: f64 = 16.0 + 4.0 * std::f64::consts::SQRT_2;

/// Weight constant used for desk-scale experiments. With the factor 2 in front
/// of the penalty this gives the familiar level `sigma sqrt(2 log(2p/j) / n)`.
pub const PRACTICAL_A: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Tuning weights `lambda_j = A sqrt(log(2p / j) / n)`, `j = 1..p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaWeights {
    weights: Vec<f64>,
    a: f64,
}

impl LambdaWeights {
    pub fn new(p: usize, n: usize, a: f64) -> Result<Self> {
        if p == 0 || n == 0 {
            return Err(Error::invalid("lambda weights need p >= 1 and n >= 1"));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(format!(
                "weight constant A must be positive, got {a}"
            )));
        }
        let pf = p as f64;
        let nf = n as f64;
        let weights = (1..=p)
            .map(|j| a * ((2.0 * pf / j as f64).ln() / nf).sqrt())
            .collect();
        Ok(LambdaWeights { weights, a })
    }

    /// Arbitrary non-increasing, nonnegative weights.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::invalid("weights must be non-increasing"));
        }
        Ok(LambdaWeights {
            weights,
            a: f64::NAN,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// The constant `A` (NaN for weights built from an explicit vector).
    pub fn scale_constant(&self) -> f64 {
        self.a
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

pub fn lambda_weights(p: usize, n: usize, a: f64) -> Result<LambdaWeights> {
    LambdaWeights::new(p, n, a)
}

/// `sum_j lambda_j * (j-th largest |beta_i|)`.
pub fn sorted_l1_norm(beta: ArrayView1<'_, f64>, lambda: &LambdaWeights) -> Result<f64> {
    if beta.len() != lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: lambda.len(),
            found: beta.len(),
        });
    }
    Ok(sorted_l1_unchecked(beta, lambda.weights()))
}

pub(crate) fn sorted_l1_unchecked(beta: ArrayView1<'_, f64>, weights: &[f64]) -> f64 {
    let mut mags: Vec<f64> = beta.iter().map(|b| b.abs()).collect();
    mags.sort_unstable_by(|a, b| b.total_cmp(a));
    mags.iter().zip(weights).map(|(m, w)| m * w).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Step `1/L` with `L` from power iteration; the step is enlarged only if
    /// a plain proximal step fails to decrease the objective.
    Fixed,
    /// Armijo-type backtracking on the smooth part at every iteration.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative objective change that stops the iteration.
    pub tolerance: f64,
    pub step_rule: StepRule,
    /// Cap on the alternating scale updates of the square-root solver.
    pub max_outer_iterations: usize,
    pub power_iterations: usize,
    pub power_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 10_000,
            tolerance: 1e-8,
            step_rule: StepRule::Fixed,
            max_outer_iterations: 100,
            power_iterations: 50,
            power_seed: 0x5eed,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.max_outer_iterations == 0 {
            return Err(Error::invalid("iteration caps must be at least 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        Ok(())
    }
}

/// Settings of the first-stage estimator: weight constant `A` plus solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PilotConfig {
    pub lambda_a: f64,
    pub solver: SolverConfig,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self::theory()
    }
}

impl PilotConfig {
    pub fn theory() -> Self {
        PilotConfig {
            lambda_a: THEORY_A,
            solver: SolverConfig::default(),
        }
    }

    pub fn practical() -> Self {
        PilotConfig {
            lambda_a: PRACTICAL_A,
            solver: SolverConfig::default(),
        }
    }

    /// Weights for a pilot fitted on `n1` rows.
    pub fn weights(&self, p: usize, n1: usize) -> Result<LambdaWeights> {
        LambdaWeights::new(p, n1, self.lambda_a)
    }
}
