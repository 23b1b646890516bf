//! Synthetic data generation, Monte Carlo risk estimation and sweeps.
//!
//! The supremum of the risk over the signal class is not observable. Risks
//! here are evaluated at a fixed law for `beta` (by default every nonzero
//! entry equal to `a`, the hardest natural choice), so they are proxies for
//! the minimax quantities, not the quantities themselves.

use ndarray::{Array1, Array2};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::mat_vec;
use crate::model::{
    hamming_distance, split_sample, Dataset, ProblemInstance, SparseVector, SplitScheme,
};
use crate::mom::{
    mom_pilot_estimate, mom_select_with_pilot, ContaminationSpec, MomConfig, OutlierKind, PilotKind,
};
use crate::rng::{stream_rng, streams, trial_seed};
use crate::selector::{Regime, ThresholdSpec, TwoStepFit};
use crate::slope::PilotConfig;
use crate::stats::mean_and_se;

/// Entry law of the design; every kind has unit variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignKind {
    GaussianIid,
    RademacherIid,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    UniformScaledIid,
}

/// Noise law, scaled to unit standard deviation before multiplying by sigma.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    Gaussian,
    StudentT { df: f64 },
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SignalKind {
    /// `beta_i = a` on the support.
    AllEqualA,
    /// `beta_i = +-a` with independent fair signs.
    RandomSignsA,
    /// `|beta_i|` uniform on `[a, max_ratio * a]` with random signs.
    MagnitudesAtLeastA { max_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub design: DesignKind,
    pub noise: NoiseKind,
    pub signal: SignalKind,
    #[serde(default)]
    pub contamination: Option<ContaminationSpec>,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Gaussian design and noise with the all-equal signal.
    pub fn gaussian(seed: u64) -> Self {
        GeneratorSpec {
            design: DesignKind::GaussianIid,
            noise: NoiseKind::Gaussian,
            signal: SignalKind::AllEqualA,
            contamination: None,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GeneratorSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if let NoiseKind::StudentT { df } = self.noise {
            if !(df.is_finite() && df >= 3.0) {
                return Err(Error::invalid(format!(
                    "Student-t noise needs df >= 3, got {df}"
                )));
            }
        }
        if let SignalKind::MagnitudesAtLeastA { max_ratio } = self.signal {
            if !(max_ratio.is_finite() && max_ratio >= 1.0) {
                return Err(Error::invalid(format!(
                    "max_ratio must be at least 1, got {max_ratio}"
                )));
            }
        }
        if let Some(c) = &self.contamination {
            c.row_range(n)?;
        }
        Ok(())
    }
}

fn design_entry<R: Rng>(kind: DesignKind, rng: &mut R) -> f64 {
    match kind {
        DesignKind::GaussianIid => rng.sample(StandardNormal),
        DesignKind::RademacherIid => {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        }
        DesignKind::UniformScaledIid => 3f64.sqrt() * rng.random_range(-1.0..1.0),
    }
}

/// Draws `(X, Y)` and the ground-truth `beta` for one instance.
///
/// Every component uses its own RNG stream, so for example changing the
/// noise law leaves the design and signal untouched. Contamination is applied
/// last and touches only the selected rows.
pub fn gen_instance(
    problem: &ProblemInstance,
    spec: &GeneratorSpec,
) -> Result<(Dataset, SparseVector)> {
    problem.validate()?;
    spec.validate(problem.n)?;
    let &ProblemInstance {
        n, p, s, a, sigma, ..
    } = problem;

    let mut rng = stream_rng(spec.seed, streams::SIGNAL);
    let mut beta = Array1::<f64>::zeros(p);
    for j in sample_indices(&mut rng, p, s) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        beta[j] = match spec.signal {
            SignalKind::AllEqualA => a,
            SignalKind::RandomSignsA => sign * a,
            SignalKind::MagnitudesAtLeastA { max_ratio } => {
                // inclusive range so max_ratio = 1 is allowed
                sign * a * rng.random_range(1.0..=max_ratio)
            }
        };
    }

    let mut rng = stream_rng(spec.seed, streams::DESIGN);
    let mut x = Array2::from_shape_simple_fn((n, p), || design_entry(spec.design, &mut rng));

    let mut rng = stream_rng(spec.seed, streams::NOISE);
    let mut y = mat_vec(x.view(), beta.view());
    if sigma > 0.0 {
        match spec.noise {
            NoiseKind::Gaussian => {
                y.mapv_inplace(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
            }
            NoiseKind::StudentT { df } => {
                let law = StudentT::new(df).map_err(|e| Error::invalid(e.to_string()))?;
                let scale = ((df - 2.0) / df).sqrt();
                y.mapv_inplace(|v| v + sigma * scale * law.sample(&mut rng));
            }
            NoiseKind::Laplace => y.mapv_inplace(|v| {
                let e1: f64 = rng.sample(Exp1);
                let e2: f64 = rng.sample(Exp1);
                v + sigma * (e1 - e2) * std::f64::consts::FRAC_1_SQRT_2
            }),
        }
    }

    if let Some(c) = &spec.contamination {
        contaminate(&mut x, &mut y, c, spec.seed)?;
    }
    Ok((Dataset::new(x, y)?, SparseVector::from(beta)))
}

/// Rows that [`gen_instance`] overwrites for this contamination spec and seed.
pub fn outlier_rows(c: &ContaminationSpec, n: usize, seed: u64) -> Result<Vec<usize>> {
    let range = c.row_range(n)?;
    let mut rng = stream_rng(seed, streams::CONTAMINATION);
    let mut rows: Vec<usize> = sample_indices(&mut rng, range.len(), c.outlier_count)
        .into_iter()
        .map(|i| range.start + i)
        .collect();
    rows.sort_unstable();
    Ok(rows)
}

fn contaminate(
    x: &mut Array2<f64>,
    y: &mut Array1<f64>,
    c: &ContaminationSpec,
    seed: u64,
) -> Result<()> {
    let rows = outlier_rows(c, y.len(), seed)?;
    // a second stream so the row choice does not shift the values
    let mut rng = stream_rng(seed ^ 0x9e37_79b9_7f4a_7c15, streams::CONTAMINATION);
    let y_max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for i in rows {
        match c.outlier_kind {
            OutlierKind::AdversarialLargeY => {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                y[i] = sign * c.magnitude * y_max;
                x.row_mut(i).mapv_inplace(|v| c.magnitude * v);
            }
            OutlierKind::RandomCorruptRow => {
                y[i] = c.magnitude * rng.sample::<f64, _>(StandardNormal);
                x.row_mut(i)
                    .mapv_inplace(|_| c.magnitude * rng.sample::<f64, _>(StandardNormal));
            }
        }
    }
    Ok(())
}

/// Selection procedure evaluated by the Monte Carlo harness. Thresholds are
/// derived from the problem at hand, so one `Method` works across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Method {
    TwoStep { regime: Regime, delta: f64 },
    Mom(MomConfig),
}

impl Method {
    pub fn two_step(regime: Regime) -> Self {
        Method::TwoStep {
            regime,
            delta: crate::selector::DEFAULT_DELTA,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::TwoStep { .. } => "TwoStep",
            Method::Mom(_) => "Mom",
        }
    }

    /// Regime label for reports; empty for the median-of-means selector.
    pub fn regime_label(&self) -> &'static str {
        match self {
            Method::TwoStep { regime, .. } => regime.as_str(),
            Method::Mom(_) => "",
        }
    }

    fn threshold_spec(&self, problem: &ProblemInstance) -> Result<Option<ThresholdSpec>> {
        match self {
            Method::TwoStep { regime, delta } => Ok(Some(
                ThresholdSpec::for_problem(*regime, problem)?.with_delta(*delta)?,
            )),
            Method::Mom(cfg) => {
                cfg.validate()?;
                cfg.resolve_k(problem.p, problem.n2)?;
                Ok(None)
            }
        }
    }
}

/// Empirical Hamming risk and exact-recovery rate of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub method: String,
    pub regime: String,
    /// Mean Hamming loss over the trials that ran to completion.
    pub hamming_mean: f64,
    pub hamming_se: Option<f64>,
    /// Fraction of all trials with exact recovery; failed trials count as
    /// misses.
    pub exact_recovery_rate: f64,
    pub recovery_se: Option<f64>,
    pub trials: usize,
    /// Trials in which the selector returned an error.
    pub failures: usize,
    /// Trials in which the pilot iteration hit its limit.
    pub nonconverged: usize,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, Copy)]
enum Outcome {
    Done { hamming: usize, converged: bool },
    Failed,
}

#[derive(Serialize)]
struct FingerprintInput<'a> {
    problem: &'a ProblemInstance,
    generator: &'a GeneratorSpec,
    method: &'a Method,
    pilot: &'a PilotConfig,
    trials: usize,
    base_seed: u64,
}

/// Hex SHA-256 of the canonical JSON of a risk configuration.
pub fn config_fingerprint(
    problem: &ProblemInstance,
    gen: &GeneratorSpec,
    method: &Method,
    pilot: &PilotConfig,
    trials: usize,
    base_seed: u64,
) -> String {
    let input = FingerprintInput {
        problem,
        generator: &gen.with_seed(0),
        method,
        pilot,
        trials,
        base_seed,
    };
    let json = serde_json::to_vec(&input).expect("configuration serializes");
    Sha256::digest(&json)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Runs every method on one generated instance. Two-step methods share a
/// single pilot fit and statistic computation; a median-of-means method with
/// the square-root SLOPE pilot reuses that same pilot.
fn run_trial(
    problem: &ProblemInstance,
    gen: &GeneratorSpec,
    methods: &[(Method, Option<ThresholdSpec>)],
    pilot: &PilotConfig,
) -> Vec<Outcome> {
    let (data, beta) = match gen_instance(problem, gen) {
        Ok(v) => v,
        Err(_) => return vec![Outcome::Failed; methods.len()],
    };
    let truth = beta.support();
    let scheme = SplitScheme::leading(problem.n, problem.n1);
    let needs_fit = methods.iter().any(|(m, _)| {
        matches!(m, Method::TwoStep { .. })
            || matches!(m, Method::Mom(c) if c.pilot == PilotKind::SqrtSlope)
    });
    let fit = needs_fit.then(|| TwoStepFit::fit(&data, &scheme, pilot));
    let halves = split_sample(&data, &scheme);

    methods
        .iter()
        .map(|(method, spec)| {
            let result = match (method, spec) {
                (Method::TwoStep { .. }, Some(spec)) => match fit.as_ref().expect("fit computed") {
                    Ok(fit) => fit
                        .select(spec)
                        .map(|sel| (sel.support, sel.pilot_converged)),
                    Err(e) => Err(e.clone()),
                },
                (Method::Mom(cfg), _) => (|| {
                    let (first, second) = halves.as_ref().map_err(Clone::clone)?;
                    let (beta_star, converged) = match (cfg.pilot, fit.as_ref()) {
                        (PilotKind::SqrtSlope, Some(Ok(fit))) => {
                            (fit.pilot.beta.clone(), fit.pilot.converged)
                        }
                        (PilotKind::SqrtSlope, Some(Err(e))) => return Err(e.clone()),
                        _ => mom_pilot_estimate(first.x(), first.y(), cfg, pilot)?,
                    };
                    let sel = mom_select_with_pilot(second.x(), second.y(), &beta_star, cfg)?;
                    Ok((sel.support, converged))
                })(),
                (Method::TwoStep { .. }, None) => {
                    unreachable!("two-step methods carry a threshold spec")
                }
            };
            match result.and_then(|(support, converged)| {
                Ok((hamming_distance(&support, &truth)?, converged))
            }) {
                Ok((hamming, converged)) => Outcome::Done { hamming, converged },
                Err(_) => Outcome::Failed,
            }
        })
        .collect()
}

/// Monte Carlo risk of several methods evaluated on the same instances.
///
/// Trial `t` uses generator seed `base_seed + t`; trials run in parallel on
/// the current rayon pool and are aggregated in trial order, so results do
/// not depend on the number of threads.
pub fn mc_risk_batch(
    problem: &ProblemInstance,
    gen: &GeneratorSpec,
    methods: &[Method],
    pilot: &PilotConfig,
    trials: usize,
    base_seed: u64,
) -> Result<Vec<RiskEstimate>> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no method to evaluate"));
    }
    problem.validate()?;
    gen.validate(problem.n)?;
    pilot.solver.validate()?;
    let prepared = methods
        .iter()
        .map(|m| Ok((m.clone(), m.threshold_spec(problem)?)))
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<Vec<Outcome>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            run_trial(
                problem,
                &gen.with_seed(trial_seed(base_seed, t)),
                &prepared,
                pilot,
            )
        })
        .collect();

    Ok(methods
        .iter()
        .enumerate()
        .map(|(k, method)| {
            let mut losses = Vec::with_capacity(trials);
            let mut hits = Vec::with_capacity(trials);
            let (mut failures, mut nonconverged) = (0, 0);
            for trial in &outcomes {
                match trial[k] {
                    Outcome::Done { hamming, converged } => {
                        losses.push(hamming as f64);
                        hits.push(if hamming == 0 { 1.0 } else { 0.0 });
                        nonconverged += usize::from(!converged);
                    }
                    Outcome::Failed => {
                        hits.push(0.0);
                        failures += 1;
                    }
                }
            }
            let (hamming_mean, hamming_se) = mean_and_se(&losses);
            let (exact_recovery_rate, recovery_se) = mean_and_se(&hits);
            RiskEstimate {
                method: method.name().to_string(),
                regime: method.regime_label().to_string(),
                hamming_mean,
                hamming_se,
                exact_recovery_rate,
                recovery_se,
                trials,
                failures,
                nonconverged,
                config_fingerprint: config_fingerprint(
                    problem, gen, method, pilot, trials, base_seed,
                ),
            }
        })
        .collect())
}

/// Monte Carlo risk of a single method.
pub fn mc_risk(
    problem: &ProblemInstance,
    gen: &GeneratorSpec,
    method: &Method,
    pilot: &PilotConfig,
    trials: usize,
    base_seed: u64,
) -> Result<RiskEstimate> {
    let mut out = mc_risk_batch(
        problem,
        gen,
        std::slice::from_ref(method),
        pilot,
        trials,
        base_seed,
    )?;
    Ok(out.remove(0))
}

/// Problem field varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Total sample size; split evenly.
    N,
    /// Second subsample size with `n1` held fixed.
    N2,
    A,
    S,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::N => "n",
            SweepAxis::N2 => "n2",
            SweepAxis::A => "a",
            SweepAxis::S => "s",
        }
    }

    /// `base` with this field set to `value`; counts are rounded.
    pub fn apply(self, base: &ProblemInstance, value: f64) -> Result<ProblemInstance> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::invalid(format!(
                "grid value {value} must be positive"
            )));
        }
        let count = value.round() as usize;
        let mut out = *base;
        match self {
            SweepAxis::N => {
                out.n = count;
                out.n1 = count / 2;
                out.n2 = count - count / 2;
            }
            SweepAxis::N2 => {
                out.n2 = count;
                out.n = base.n1 + count;
            }
            SweepAxis::A => out.a = value,
            SweepAxis::S => out.s = count,
        }
        out.validate()?;
        Ok(out)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "n" => Ok(SweepAxis::N),
            "n2" => Ok(SweepAxis::N2),
            "a" => Ok(SweepAxis::A),
            "s" => Ok(SweepAxis::S),
            other => Err(Error::invalid(format!(
                "unknown sweep axis '{other}' (expected n, n2, a or s)"
            ))),
        }
    }
}

/// One method at one grid point. `estimate` is absent when the point failed,
/// with the reason in `status`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub problem: Option<ProblemInstance>,
    pub method: String,
    pub regime: String,
    pub status: String,
    pub estimate: Option<RiskEstimate>,
}

/// Runs [`mc_risk_batch`] at every grid point. Failing points become rows
/// with an error status and the sweep moves on.
#[allow(clippy::too_many_arguments)]
pub fn phase_sweep(
    base: &ProblemInstance,
    axis: SweepAxis,
    grid: &[f64],
    gen: &GeneratorSpec,
    methods: &[Method],
    pilot: &PilotConfig,
    trials: usize,
    base_seed: u64,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no method to evaluate"));
    }
    let mut rows = Vec::with_capacity(grid.len() * methods.len());
    for &value in grid {
        let point = axis.apply(base, value);
        let result = point
            .as_ref()
            .map_err(Clone::clone)
            .and_then(|problem| mc_risk_batch(problem, gen, methods, pilot, trials, base_seed));
        for (k, method) in methods.iter().enumerate() {
            let (status, estimate) = match &result {
                Ok(estimates) => ("ok".to_string(), Some(estimates[k].clone())),
                Err(e) => (format!("error: {e}"), None),
            };
            rows.push(SweepRow {
                axis,
                value,
                problem: point.as_ref().ok().copied(),
                method: method.name().to_string(),
                regime: method.regime_label().to_string(),
                status,
                estimate,
            });
        }
    }
    Ok(rows)
}

/// `count` grid values from `start` to `stop` inclusive, evenly spaced on a
/// linear or logarithmic scale.
pub fn grid(start: f64, stop: f64, count: usize, log_scale: bool) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::invalid("grid needs at least one point"));
    }
    if !(start.is_finite() && stop.is_finite()) || (log_scale && (start <= 0.0 || stop <= 0.0)) {
        return Err(Error::invalid(format!(
            "invalid grid bounds {start}..{stop}"
        )));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    let step = |i: usize| i as f64 / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if log_scale {
                // powf keeps exact ratios such as 10 * 2^k exact
                start * (stop / start).powf(step(i))
            } else {
                start + step(i) * (stop - start)
            }
        })
        .collect())
}
