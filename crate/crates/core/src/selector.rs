//! The two-step selector: a square-root SLOPE pilot on the first subsample,
//! debiased per-coordinate statistics on the second, and a threshold chosen
//! by one of four regimes depending on which of `(a, sigma, s)` are known.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{column_norms, mat_t_vec, mat_vec, norm};
use crate::model::{
    split_sample, Dataset, ProblemInstance, SparseVector, SplitScheme, SupportMask,
};
use crate::slope::{sqrt_slope_solve, PilotConfig, SqrtSlopeFit};

/// Which problem parameters the threshold may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `a`, `sigma` and `s` known.
    KnownAll,
    KnownA,
    KnownSigma,
    /// Nothing known; the noise level is estimated on the second subsample.
    FullyAdaptive,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::KnownAll,
        Regime::KnownA,
        Regime::KnownSigma,
        Regime::FullyAdaptive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::KnownAll => "KnownAll",
            Regime::KnownA => "KnownA",
            Regime::KnownSigma => "KnownSigma",
            Regime::FullyAdaptive => "FullyAdaptive",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    /// Case-insensitive; `-` and `_` are ignored, so `known-all`, `known_all`
    /// and `KnownAll` all parse.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "knownall" => Ok(Regime::KnownAll),
            "knowna" => Ok(Regime::KnownA),
            "knownsigma" => Ok(Regime::KnownSigma),
            "fullyadaptive" | "adaptive" => Ok(Regime::FullyAdaptive),
            _ => Err(Error::invalid(format!("unknown regime {s:?}"))),
        }
    }
}

/// Default `delta`, the assumed bound on `||beta_hat - beta|| / sigma`.
pub const DEFAULT_DELTA: f64 = 1.0;

/// Threshold regime plus the parameters it is allowed to see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub regime: Regime,
    pub a: Option<f64>,
    pub sigma: Option<f64>,
    pub delta: f64,
    pub p: usize,
    pub s: Option<usize>,
    pub n2: usize,
}

impl ThresholdSpec {
    pub fn known_all(a: f64, sigma: f64, s: usize, p: usize, n2: usize) -> Result<Self> {
        ThresholdSpec {
            regime: Regime::KnownAll,
            a: Some(a),
            sigma: Some(sigma),
            delta: DEFAULT_DELTA,
            p,
            s: Some(s),
            n2,
        }
        .validated()
    }

    pub fn known_a(a: f64, p: usize, n2: usize) -> Result<Self> {
        ThresholdSpec {
            regime: Regime::KnownA,
            a: Some(a),
            sigma: None,
            delta: DEFAULT_DELTA,
            p,
            s: None,
            n2,
        }
        .validated()
    }

    pub fn known_sigma(sigma: f64, p: usize, n2: usize) -> Result<Self> {
        ThresholdSpec {
            regime: Regime::KnownSigma,
            a: None,
            sigma: Some(sigma),
            delta: DEFAULT_DELTA,
            p,
            s: None,
            n2,
        }
        .validated()
    }

    pub fn fully_adaptive(p: usize, n2: usize) -> Result<Self> {
        ThresholdSpec {
            regime: Regime::FullyAdaptive,
            a: None,
            sigma: None,
            delta: DEFAULT_DELTA,
            p,
            s: None,
            n2,
        }
        .validated()
    }

    /// The spec for `regime`, taking whatever the regime needs from `problem`.
    pub fn for_problem(regime: Regime, problem: &ProblemInstance) -> Result<Self> {
        let (p, n2) = (problem.p, problem.n2);
        match regime {
            Regime::KnownAll => Self::known_all(problem.a, problem.sigma, problem.s, p, n2),
            Regime::KnownA => Self::known_a(problem.a, p, n2),
            Regime::KnownSigma => Self::known_sigma(problem.sigma, p, n2),
            Regime::FullyAdaptive => Self::fully_adaptive(p, n2),
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n2 == 0 {
            return Err(Error::invalid("threshold needs p >= 1 and n2 >= 1"));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        let need_a = matches!(self.regime, Regime::KnownAll | Regime::KnownA);
        let need_sigma = matches!(self.regime, Regime::KnownAll | Regime::KnownSigma);
        match self.a {
            Some(a) if !(a.is_finite() && a > 0.0) => {
                return Err(Error::invalid(format!("a must be positive, got {a}")))
            }
            None if need_a => {
                return Err(Error::invalid(format!("regime {} requires a", self.regime)))
            }
            _ => {}
        }
        match self.sigma {
            Some(sigma) if !(sigma.is_finite() && sigma >= 0.0) => {
                return Err(Error::invalid(format!(
                    "sigma must be nonnegative, got {sigma}"
                )))
            }
            None if need_sigma => {
                return Err(Error::invalid(format!(
                    "regime {} requires sigma",
                    self.regime
                )))
            }
            _ => {}
        }
        if self.regime == Regime::KnownAll {
            let s = self
                .s
                .ok_or_else(|| Error::invalid("regime KnownAll requires s"))?;
            if s == 0 {
                return Err(Error::invalid("s must be positive"));
            }
            if 2 * s > self.p {
                return Err(Error::RegimeViolation(format!(
                    "KnownAll threshold needs s <= p/2, got s={s}, p={}",
                    self.p
                )));
            }
        }
        Ok(())
    }

    fn require_regime(&self, regime: Regime) -> Result<()> {
        if self.regime != regime {
            return Err(Error::invalid(format!(
                "threshold for {regime} called with a {} spec",
                self.regime
            )));
        }
        self.validate()
    }
}

/// Debiased statistics `alpha_i` and the column norms `||X_i||` of the
/// second-subsample design.
#[derive(Debug, Clone, PartialEq)]
pub struct DebiasedStats {
    pub alpha: Array1<f64>,
    pub column_norms: Array1<f64>,
}

/// `alpha_i = X_i^T (Y - sum_{j != i} X_j b_j) / ||X_i||`, computed from the
/// single residual `R = Y - X b` as `X_i^T (R + X_i b_i) / ||X_i||`.
pub fn debiased_stats(
    x2: ArrayView2<'_, f64>,
    y2: ArrayView1<'_, f64>,
    beta_hat: &SparseVector,
) -> Result<DebiasedStats> {
    check_dims(x2, y2, beta_hat)?;
    let norms = column_norms(x2);
    if let Some(index) = norms.iter().position(|&c| c == 0.0) {
        return Err(Error::ZeroColumn { index });
    }
    let beta = beta_hat.as_array();
    let resid = &y2 - &mat_vec(x2, beta);
    let corr = mat_t_vec(x2, resid.view());
    let alpha = Array1::from_shape_fn(norms.len(), |i| {
        (corr[i] + norms[i] * norms[i] * beta[i]) / norms[i]
    });
    Ok(DebiasedStats {
        alpha,
        column_norms: norms,
    })
}

fn check_dims(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, beta: &SparseVector) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.ncols() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: beta.len(),
        });
    }
    Ok(())
}

/// The oracle threshold shape `a u / 2 + sigma^2 log(p/s - 1) / (a u)`, with
/// the noise level passed as a variance.
pub fn prototype_threshold(a: f64, noise_var: f64, p: usize, s: usize, norm_u: f64) -> f64 {
    let ratio = p as f64 / s as f64 - 1.0;
    a * norm_u / 2.0 + noise_var * ratio.ln() / (a * norm_u)
}

/// KnownAll: the prototype at the inflated noise level `sigma^2 (1 + delta^2)`.
pub fn threshold_known(spec: &ThresholdSpec, norm_u: f64) -> Result<f64> {
    spec.require_regime(Regime::KnownAll)?;
    check_norm(norm_u)?;
    let (a, sigma, s) = (spec.a.unwrap(), spec.sigma.unwrap(), spec.s.unwrap());
    let var = sigma * sigma * (1.0 + spec.delta * spec.delta);
    Ok(prototype_threshold(a, var, spec.p, s, norm_u))
}

/// KnownA: `a u / 2`.
pub fn threshold_known_a(spec: &ThresholdSpec, norm_u: f64) -> Result<f64> {
    spec.require_regime(Regime::KnownA)?;
    check_norm(norm_u)?;
    Ok(spec.a.unwrap() * norm_u / 2.0)
}

/// KnownSigma: `sigma sqrt(2 (p^(2/n2) - 1)) u`.
pub fn threshold_known_sigma(spec: &ThresholdSpec, norm_u: f64) -> Result<f64> {
    spec.require_regime(Regime::KnownSigma)?;
    check_norm(norm_u)?;
    Ok(scale_free_threshold(
        spec.sigma.unwrap(),
        spec.p,
        spec.n2,
        norm_u,
    ))
}

/// FullyAdaptive: the KnownSigma threshold with `sigma` replaced by an estimate.
pub fn threshold_fully_adaptive(sigma_hat: f64, p: usize, n2: usize, norm_u: f64) -> f64 {
    scale_free_threshold(sigma_hat, p, n2, norm_u)
}

fn scale_free_threshold(sigma: f64, p: usize, n2: usize, norm_u: f64) -> f64 {
    // p^(2/n2) - 1 via exp_m1 to keep precision when 2 log(p) / n2 is small
    let growth = (2.0 * (p as f64).ln() / n2 as f64).exp_m1();
    sigma * (2.0 * growth).sqrt() * norm_u
}

fn check_norm(norm_u: f64) -> Result<()> {
    if !(norm_u.is_finite() && norm_u > 0.0) {
        return Err(Error::invalid(format!(
            "column norm must be positive, got {norm_u}"
        )));
    }
    Ok(())
}

/// Root mean squared residual of `beta_hat` on the second subsample.
pub fn estimate_sigma_hat(
    x2: ArrayView2<'_, f64>,
    y2: ArrayView1<'_, f64>,
    beta_hat: &SparseVector,
) -> Result<f64> {
    check_dims(x2, y2, beta_hat)?;
    if y2.is_empty() {
        return Err(Error::invalid("second subsample is empty"));
    }
    let resid = &y2 - &mat_vec(x2, beta_hat.as_array());
    Ok(norm(resid.view()) / (y2.len() as f64).sqrt())
}

/// Range of the per-coordinate thresholds actually applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl ThresholdSummary {
    fn of(t: &Array1<f64>) -> Self {
        ThresholdSummary {
            min: t.iter().copied().fold(f64::INFINITY, f64::min),
            max: t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: t.mean().unwrap_or(f64::NAN),
        }
    }
}

/// Output of the selector together with what was needed to produce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub support: SupportMask,
    pub regime: Regime,
    /// Noise estimate used by the threshold (FullyAdaptive only).
    pub sigma_hat: Option<f64>,
    pub thresholds: ThresholdSummary,
    pub pilot_converged: bool,
}

/// The regime-independent part of the selector: pilot fit on the first
/// subsample, debiased statistics and residual scale on the second. Any
/// number of regimes can then be thresholded without refitting.
#[derive(Debug, Clone)]
pub struct TwoStepFit {
    pub pilot: SqrtSlopeFit,
    pub stats: DebiasedStats,
    /// Root mean squared residual of the pilot on the second subsample.
    pub sigma_hat: f64,
    pub n2: usize,
}

impl TwoStepFit {
    pub fn fit(data: &Dataset, scheme: &SplitScheme, pilot: &PilotConfig) -> Result<Self> {
        let (first, second) = split_sample(data, scheme)?;
        let lambda = pilot.weights(data.p(), first.n())?;
        let fit = sqrt_slope_solve(first.x(), first.y(), &lambda, &pilot.solver)?;
        let stats = debiased_stats(second.x(), second.y(), &fit.beta)?;
        let sigma_hat = estimate_sigma_hat(second.x(), second.y(), &fit.beta)?;
        Ok(TwoStepFit {
            pilot: fit,
            stats,
            sigma_hat,
            n2: second.n(),
        })
    }

    /// Per-coordinate thresholds under `spec`.
    pub fn thresholds(&self, spec: &ThresholdSpec) -> Result<Array1<f64>> {
        let norms = &self.stats.column_norms;
        if spec.p != norms.len() {
            return Err(Error::DimensionMismatch {
                expected: norms.len(),
                found: spec.p,
            });
        }
        if spec.n2 != self.n2 {
            return Err(Error::DimensionMismatch {
                expected: self.n2,
                found: spec.n2,
            });
        }
        spec.validate()?;
        norms
            .iter()
            .map(|&u| match spec.regime {
                Regime::KnownAll => threshold_known(spec, u),
                Regime::KnownA => threshold_known_a(spec, u),
                Regime::KnownSigma => threshold_known_sigma(spec, u),
                Regime::FullyAdaptive => {
                    Ok(threshold_fully_adaptive(self.sigma_hat, spec.p, spec.n2, u))
                }
            })
            .collect()
    }

    /// `eta_i = 1` iff `|alpha_i| > t_i` (strict).
    pub fn select(&self, spec: &ThresholdSpec) -> Result<Selection> {
        let t = self.thresholds(spec)?;
        let bits = self
            .stats
            .alpha
            .iter()
            .zip(&t)
            .map(|(alpha, t)| alpha.abs() > *t)
            .collect();
        Ok(Selection {
            support: SupportMask { bits },
            regime: spec.regime,
            sigma_hat: (spec.regime == Regime::FullyAdaptive).then_some(self.sigma_hat),
            thresholds: ThresholdSummary::of(&t),
            pilot_converged: self.pilot.converged,
        })
    }
}

/// Runs the two-step selector and returns the estimated support.
pub fn select(
    data: &Dataset,
    problem: &ProblemInstance,
    spec: &ThresholdSpec,
    pilot: &PilotConfig,
    scheme: &SplitScheme,
) -> Result<SupportMask> {
    Ok(select_detailed(data, problem, spec, pilot, scheme)?.support)
}

/// [`select`] with the threshold summary, noise estimate and pilot status.
pub fn select_detailed(
    data: &Dataset,
    problem: &ProblemInstance,
    spec: &ThresholdSpec,
    pilot: &PilotConfig,
    scheme: &SplitScheme,
) -> Result<Selection> {
    if data.n() != problem.n || data.p() != problem.p {
        return Err(Error::invalid(format!(
            "dataset is {}x{} but the problem declares {}x{}",
            data.n(),
            data.p(),
            problem.n,
            problem.p
        )));
    }
    scheme.check_sizes(problem)?;
    spec.validate()?;
    TwoStepFit::fit(data, scheme, pilot)?.select(spec)
}
