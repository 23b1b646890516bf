//! Evaluators for the minimax risk characterisers `psi`, `psi_plus`, the
//! lower and upper bounds built from them, two tail inequalities, sufficient
//! sample sizes and the phase-transition table.
//!
//! Unknown absolute constants are explicit inputs ([`BoundConstants`]) and are
//! echoed in every report; values computed with the default constants of 1
//! describe the shape of a bound, not its magnitude.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared as ChiSquaredLaw, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::rng::stream_rng;
use crate::stats::{ln_normal_sf, normal_sf};

/// RNG stream used by the bound estimators.
const BOUNDS_STREAM: u64 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub trials: usize,
    pub seed: u64,
    /// Pair every uniform `U` with `1 - U`.
    pub antithetic: bool,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            trials: 20_000,
            seed: 0,
            antithetic: true,
        }
    }
}

impl MonteCarloConfig {
    pub fn new(trials: usize, seed: u64) -> Self {
        MonteCarloConfig {
            trials,
            seed,
            antithetic: true,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::invalid("Monte Carlo needs at least one trial"));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate with its standard error (absent for one trial).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Self {
        let (value, se) = crate::stats::mean_and_se(samples);
        Estimate { value, se }
    }

    pub fn se_or_zero(&self) -> f64 {
        self.se.unwrap_or(0.0)
    }
}

/// A reported bound: either a value or the reason it does not apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Bound {
    Available {
        value: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        se: Option<f64>,
        /// False when the value is vacuous (a lower bound that is not positive).
        informative: bool,
    },
    Absent {
        reason: String,
    },
}

impl Bound {
    pub fn value(value: f64) -> Self {
        Bound::Available {
            value,
            se: None,
            informative: value > 0.0,
        }
    }

    pub fn estimate(est: Estimate) -> Self {
        Bound::Available {
            value: est.value,
            se: est.se,
            informative: est.value > 0.0,
        }
    }

    pub fn absent(reason: impl Into<String>) -> Self {
        Bound::Absent {
            reason: reason.into(),
        }
    }

    pub fn get(&self) -> Option<f64> {
        match self {
            Bound::Available { value, .. } => Some(*value),
            Bound::Absent { .. } => None,
        }
    }

    pub fn reason(&self) -> Option<&str> {
        match self {
            Bound::Available { .. } => None,
            Bound::Absent { reason } => Some(reason),
        }
    }
}

/// Constants that the theory leaves unspecified, plus user margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundConstants {
    pub c0: f64,
    /// Pilot constant of the fully adaptive regime.
    pub c0_bar: f64,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
    /// `s'` of the first lower bound; `s/2` when absent.
    pub s_prime: Option<f64>,
    /// Absolute constant of the second lower bound.
    pub c: f64,
    /// Margin in the sufficient `n2` of the KnownAll regime.
    pub epsilon: f64,
    /// Constant of the sub-Gaussian sample size.
    pub c_subgaussian: f64,
    /// Exponent of the maximum-likelihood decoder bound; not reported when absent.
    pub b_star: Option<f64>,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c0: 1.0,
            c0_bar: 1.0,
            c1: 1.0,
            c2: 1.0,
            delta: 1.0,
            s_prime: None,
            c: 1.0,
            epsilon: 0.1,
            c_subgaussian: 1.0,
            b_star: None,
        }
    }
}

impl BoundConstants {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("c0", self.c0),
            ("c0_bar", self.c0_bar),
            ("c1", self.c1),
            ("c2", self.c2),
            ("c", self.c),
            ("epsilon", self.epsilon),
            ("c_subgaussian", self.c_subgaussian),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "constant {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1], got {}",
                self.delta
            )));
        }
        if let Some(b) = self.b_star {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::invalid(format!("b_star must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::invalid(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Why `psi` cannot be evaluated at these parameters, if it cannot.
fn psi_domain(n: usize, p: usize, s: usize) -> Option<String> {
    if n == 0 {
        return Some("n must be at least 1".into());
    }
    if s == 0 {
        return Some("s must be at least 1".into());
    }
    if 2 * s >= p {
        return Some(format!("s >= p/2 (s={s}, p={p})"));
    }
    None
}

/// `log(p/s - 1)`.
fn log_odds(p: usize, s: usize) -> f64 {
    (p as f64 / s as f64 - 1.0).ln()
}

fn psi_mc_impl(
    n: usize,
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    mc: &MonteCarloConfig,
    clamp: bool,
) -> Result<Estimate> {
    if let Some(reason) = psi_domain(n, p, s) {
        return Err(Error::RegimeViolation(reason));
    }
    check_positive("a", a)?;
    check_positive("sigma", sigma)?;
    mc.validate()?;
    let chi2 = ChiSquaredLaw::new(n as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let odds = log_odds(p, s);
    let (pf, sf) = (p as f64, s as f64);
    // given ||zeta|| = z the two Gaussian tails are explicit
    let term = |z2: f64| -> f64 {
        let z = z2.sqrt();
        let t = a * z / 2.0 + sigma * sigma * odds / (a * z);
        let margin = a * z - t;
        let margin = if clamp { margin.max(0.0) } else { margin };
        (pf - sf) * normal_sf(t / sigma) + sf * normal_sf(margin / sigma)
    };
    let mut rng = stream_rng(mc.seed, BOUNDS_STREAM);
    let samples: Vec<f64> = (0..mc.trials)
        .map(|_| {
            let u: f64 = rng.random();
            let u = u.max(f64::MIN_POSITIVE);
            if mc.antithetic {
                0.5 * (term(chi2.inverse_cdf(u)) + term(chi2.inverse_cdf(1.0 - u)))
            } else {
                term(chi2.inverse_cdf(u))
            }
        })
        .collect();
    Ok(Estimate::from_samples(&samples))
}

/// Monte Carlo estimate of
/// `psi_plus = (p-s) P(sigma eps > t(zeta)) + s P(sigma eps >= a||zeta|| - t(zeta))`,
/// with `zeta ~ N(0, I_n)` and `t(u) = a||u||/2 + sigma^2 log(p/s - 1) / (a||u||)`.
///
/// Only `||zeta||^2 ~ chi^2(n)` is sampled (by inversion); both Gaussian tails
/// are evaluated exactly given it. Requires `s < p/2`.
pub fn psi_plus_mc(
    n: usize,
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    mc: &MonteCarloConfig,
) -> Result<Estimate> {
    psi_mc_impl(n, p, s, a, sigma, mc, false)
}

/// As [`psi_plus_mc`] with the margin `a||zeta|| - t(zeta)` clamped at zero.
pub fn psi_mc(
    n: usize,
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    mc: &MonteCarloConfig,
) -> Result<Estimate> {
    psi_mc_impl(n, p, s, a, sigma, mc, true)
}

/// `(s'/s) (psi_plus - 4 s exp(-(s - s')^2 / (2s)))`; may be negative.
pub fn lower_bound_thm1(
    n: usize,
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    s_prime: f64,
    mc: &MonteCarloConfig,
) -> Result<f64> {
    let psi_plus = psi_plus_mc(n, p, s, a, sigma, mc)?;
    lower_bound_from_psi_plus(psi_plus.value, s, s_prime)
}

/// The first lower bound for a given value of `psi_plus`.
pub fn lower_bound_from_psi_plus(psi_plus: f64, s: usize, s_prime: f64) -> Result<f64> {
    let sf = s as f64;
    if !(s_prime > 0.0 && s_prime <= sf) {
        return Err(Error::invalid(format!(
            "s' must lie in (0, s], got {s_prime}"
        )));
    }
    let gap = sf - s_prime;
    Ok(s_prime / sf * (psi_plus - 4.0 * sf * (-gap * gap / (2.0 * sf)).exp()))
}

/// `(s/8)(1 - 16 exp(-s/8))`, applicable when `s >= 6` and
/// `n <= 2 sigma^2 log(p/s - 1) / a^2`.
pub fn lower_bound_prop3(n: usize, p: usize, s: usize, a: f64, sigma: f64) -> Bound {
    if s < 6 {
        return Bound::absent(format!("condition s >= 6 fails (s={s})"));
    }
    if s >= p {
        return Bound::absent(format!("condition s < p fails (s={s}, p={p})"));
    }
    let cutoff = 2.0 * sigma * sigma * log_odds(p, s) / (a * a);
    if n as f64 > cutoff {
        return Bound::absent(format!(
            "condition n <= 2 sigma^2 log(p/s-1)/a^2 fails (n={n}, cutoff={cutoff})"
        ));
    }
    let sf = s as f64;
    Bound::value(sf / 8.0 * (1.0 - 16.0 * (-sf / 8.0).exp()))
}

/// `c sqrt(s^(7/4) (p-s)^(1/4) / (n L)) exp(-n L / 2) - 2 s exp(-s/8)` with
/// `L = log(1 + a^2 / (4 sigma^2))`; applicable when
/// `n > 2 sigma^2 log(p/s - 1) / a^2`, `a < sqrt(2) sigma` and `s < p/2`.
pub fn lower_bound_thm3(n: usize, p: usize, s: usize, a: f64, sigma: f64, c: f64) -> Bound {
    if 2 * s >= p {
        return Bound::absent(format!("condition s < p/2 fails (s={s}, p={p})"));
    }
    if a >= std::f64::consts::SQRT_2 * sigma {
        return Bound::absent(format!(
            "condition a < sqrt(2) sigma fails (a={a}, sigma={sigma})"
        ));
    }
    let cutoff = 2.0 * sigma * sigma * log_odds(p, s) / (a * a);
    if n as f64 <= cutoff {
        return Bound::absent(format!(
            "condition n > 2 sigma^2 log(p/s-1)/a^2 fails (n={n}, cutoff={cutoff})"
        ));
    }
    let (nf, pf, sf) = (n as f64, p as f64, s as f64);
    let l = (a * a / (4.0 * sigma * sigma)).ln_1p();
    let ln_lead = 0.5 * (1.75 * sf.ln() + 0.25 * (pf - sf).ln() - (nf * l).ln()) - nf * l / 2.0;
    Bound::value(c * ln_lead.exp() - 2.0 * sf * (-sf / 8.0).exp())
}

/// Hamming-risk and exact-recovery-probability versions of an upper bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpperBounds {
    pub hamming: Bound,
    pub probability: Bound,
}

impl UpperBounds {
    fn absent(reason: String) -> Self {
        UpperBounds {
            hamming: Bound::absent(reason.clone()),
            probability: Bound::absent(reason),
        }
    }
}

/// `C1 (s / 2p)^(C2 s)`, the pilot failure term.
pub fn pilot_failure_term(p: usize, s: usize, c1: f64, c2: f64) -> f64 {
    let (pf, sf) = (p as f64, s as f64);
    c1 * (c2 * sf * (sf / (2.0 * pf)).ln()).exp()
}

fn pilot_condition(n1: usize, p: usize, s: usize, consts: &BoundConstants) -> Option<String> {
    let need = pilot_sample_size(p, s, consts.c0, consts.delta);
    (n1 as f64 <= need).then(|| {
        format!("condition n1 > (C0/delta^2) s log(ep/s) fails (n1={n1}, required={need})")
    })
}

/// `(C0 / delta^2) s log(e p / s)`.
pub fn pilot_sample_size(p: usize, s: usize, c0: f64, delta: f64) -> f64 {
    let (pf, sf) = (p as f64, s as f64);
    c0 / (delta * delta) * sf * (1.0 + (pf / sf).ln())
}

/// `2 psi(n2, p, s, a, sigma sqrt(1 + delta^2)) + C1 p (s/2p)^(C2 s)` and the
/// probability version without the factor `p`.
#[allow(clippy::too_many_arguments)]
pub fn upper_bound_thm2(
    n1: usize,
    n2: usize,
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    consts: &BoundConstants,
    mc: &MonteCarloConfig,
) -> Result<UpperBounds> {
    consts.validate()?;
    if 2 * s > p {
        return Ok(UpperBounds::absent(format!(
            "condition s <= p/2 fails (s={s}, p={p})"
        )));
    }
    if let Some(reason) = pilot_condition(n1, p, s, consts) {
        return Ok(UpperBounds::absent(reason));
    }
    let scale = sigma * (1.0 + consts.delta * consts.delta).sqrt();
    let psi = match psi_mc(n2, p, s, a, scale, mc) {
        Ok(psi) => psi,
        Err(Error::RegimeViolation(reason)) => return Ok(UpperBounds::absent(reason)),
        Err(e) => return Err(e),
    };
    let tail = pilot_failure_term(p, s, consts.c1, consts.c2);
    let se = psi.se.map(|se| 2.0 * se);
    let with = |v: f64| Bound::Available {
        value: v,
        se,
        informative: true,
    };
    Ok(UpperBounds {
        hamming: with(2.0 * psi.value + p as f64 * tail),
        probability: with(2.0 * psi.value + tail),
    })
}

/// Closed-form upper bound: `2 sqrt(s(p-s)) exp(-(n2/2) log(1 + a^2 / (4 sigma^2 (1+delta^2))))
/// + s exp(-n2/24) + C1 p (s/2p)^(C2 s)`, and the probability version
/// without the factor `p` in the last term.
pub fn upper_bound_thm4(
    n1: usize,
    n2: usize,
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    consts: &BoundConstants,
) -> Result<UpperBounds> {
    consts.validate()?;
    if 2 * s > p {
        return Ok(UpperBounds::absent(format!(
            "condition s <= p/2 fails (s={s}, p={p})"
        )));
    }
    if a > sigma {
        return Ok(UpperBounds::absent(format!(
            "condition a <= sigma fails (a={a}, sigma={sigma})"
        )));
    }
    let need_n2 = 4.0 * sigma * sigma * log_odds(p, s) / (a * a);
    if (n2 as f64) < need_n2 {
        return Ok(UpperBounds::absent(format!(
            "condition n2 >= 4 sigma^2 log(p/s-1)/a^2 fails (n2={n2}, required={need_n2})"
        )));
    }
    if let Some(reason) = pilot_condition(n1, p, s, consts) {
        return Ok(UpperBounds::absent(reason));
    }
    let (n2f, pf, sf) = (n2 as f64, p as f64, s as f64);
    let rate = (a * a / (4.0 * sigma * sigma * (1.0 + consts.delta * consts.delta))).ln_1p();
    let head = 2.0 * (sf * (pf - sf)).sqrt() * (-n2f / 2.0 * rate).exp() + sf * (-n2f / 24.0).exp();
    let tail = pilot_failure_term(p, s, consts.c1, consts.c2);
    Ok(UpperBounds {
        hamming: Bound::value(head + pf * tail),
        probability: Bound::value(head + tail),
    })
}

/// `3 (s(p-s))^((1-B)/2) + C1 (s/2p)^(C2 s)`, for `B >= 1`.
pub fn upper_bound_cor2(p: usize, s: usize, b: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(b.is_finite() && b >= 1.0) {
        return Err(Error::invalid(format!("B must be at least 1, got {b}")));
    }
    if s >= p {
        return Err(Error::invalid(format!("need s < p, got s={s}, p={p}")));
    }
    let (pf, sf) = (p as f64, s as f64);
    Ok(3.0 * ((1.0 - b) / 2.0 * (sf * (pf - sf)).ln()).exp() + pilot_failure_term(p, s, c1, c2))
}

/// The largest `B` for which `n2` meets the sample-size condition of
/// [`upper_bound_cor2`]: `n2 log(1 + a^2/(4 sigma^2 (1+delta^2))) / log(s(p-s))`.
pub fn implied_b(n2: usize, p: usize, s: usize, a: f64, sigma: f64, delta: f64) -> f64 {
    let rate = (a * a / (4.0 * sigma * sigma * (1.0 + delta * delta))).ln_1p();
    n2 as f64 * rate / ((s as f64) * ((p - s) as f64)).ln()
}

/// `s ((e s (p-s))^(-B*) + (s / (e (p-s)))^(B* s))`, the known bound for the
/// maximum-likelihood decoder.
pub fn ml_decoder_bound(p: usize, s: usize, b_star: f64) -> f64 {
    let (pf, sf) = (p as f64, s as f64);
    let e = std::f64::consts::E;
    sf * ((e * sf * (pf - sf)).powf(-b_star) + (sf / (e * (pf - sf))).powf(b_star * sf))
}

/// `(1 + b^2)^(-(k-1)/2) / (sqrt(k) b)`, the shape of `P(|T_k| >= sqrt(k) b)`
/// for a Student variable with `k` degrees of freedom. Requires `b >= 1/sqrt(k)`.
pub fn student_tail_envelope(k: usize, b: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("degrees of freedom must be at least 1"));
    }
    let kf = k as f64;
    if !(b.is_finite() && b * kf.sqrt() >= 1.0 - 1e-12) {
        return Err(Error::invalid(format!(
            "b must be at least 1/sqrt(k), got {b} with k={k}"
        )));
    }
    Ok((-(kf - 1.0) / 2.0 * (b * b).ln_1p()).exp() / (kf.sqrt() * b))
}

/// Monte Carlo estimate of `P(|T_k| >= sqrt(k) b)`.
///
/// Writes `T = Z / sqrt(V/k)` with `V ~ chi^2(k)`, integrates `Z` out
/// exactly (`2 P(Z >= b sqrt(V))`) and samples `V` from the tilted law
/// `Gamma(k/2, 2/(1+b^2))` with weight `(1+b^2)^(-k/2) exp(b^2 V / 2)`, which
/// keeps the relative error bounded far into the tail.
pub fn student_tail_mc(k: usize, b: f64, mc: &MonteCarloConfig) -> Result<Estimate> {
    if k == 0 {
        return Err(Error::invalid("degrees of freedom must be at least 1"));
    }
    check_positive("b", b)?;
    mc.validate()?;
    let kf = k as f64;
    let b2 = b * b;
    let tilted =
        Gamma::new(kf / 2.0, 2.0 / (1.0 + b2)).map_err(|e| Error::invalid(e.to_string()))?;
    let ln_norm = -kf / 2.0 * b2.ln_1p();
    let mut rng = stream_rng(mc.seed, BOUNDS_STREAM + 1);
    let samples: Vec<f64> = (0..mc.trials)
        .map(|_| {
            let v: f64 = tilted.sample(&mut rng);
            (ln_norm + b2 * v / 2.0 + std::f64::consts::LN_2 + ln_normal_sf(b * v.sqrt())).exp()
        })
        .collect();
    Ok(Estimate::from_samples(&samples))
}

/// `2 exp(-t^2 N / (4 (1 + t)))`, bounding `P(|chi^2(N)/N - 1| >= t)`.
pub fn chi2_tail_bound(dof: usize, t: f64) -> Result<f64> {
    if dof == 0 {
        return Err(Error::invalid("degrees of freedom must be at least 1"));
    }
    check_positive("t", t)?;
    Ok(2.0 * (-t * t * dof as f64 / (4.0 * (1.0 + t))).exp())
}

/// Empirical frequency of `|chi^2(N)/N - 1| >= t`.
pub fn chi2_tail_mc(dof: usize, t: f64, mc: &MonteCarloConfig) -> Result<Estimate> {
    if dof == 0 {
        return Err(Error::invalid("degrees of freedom must be at least 1"));
    }
    check_positive("t", t)?;
    mc.validate()?;
    let law = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = stream_rng(mc.seed, BOUNDS_STREAM + 2);
    let nf = dof as f64;
    let hits: Vec<f64> = (0..mc.trials)
        .map(|_| {
            let x: f64 = law.sample(&mut rng);
            if (x / nf - 1.0).abs() >= t {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok(Estimate::from_samples(&hits))
}

/// Threshold regimes for which a sufficient sample size is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleRegime {
    KnownAll,
    KnownA,
    KnownSigma,
    FullyAdaptive,
    /// Sub-Gaussian design and noise with the KnownA threshold.
    SubGaussian,
}

impl SampleRegime {
    pub const ALL: [SampleRegime; 5] = [
        SampleRegime::KnownAll,
        SampleRegime::KnownA,
        SampleRegime::KnownSigma,
        SampleRegime::FullyAdaptive,
        SampleRegime::SubGaussian,
    ];
}

/// Sufficient subsample sizes; `n = n1 + n2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    pub regime: SampleRegime,
    pub n1: f64,
    pub n2: f64,
    pub n: f64,
}

/// Evaluates the sufficient sample size of `regime` with the given constants.
/// All regimes except KnownAll use an even split `n1 = n2 = n/2`.
pub fn sufficient_n(
    p: usize,
    s: usize,
    a: f64,
    sigma: f64,
    regime: SampleRegime,
    consts: &BoundConstants,
) -> Result<SampleSize> {
    consts.validate()?;
    check_positive("a", a)?;
    check_positive("sigma", sigma)?;
    if s == 0 || s >= p {
        return Err(Error::invalid(format!("need 1 <= s < p, got s={s}, p={p}")));
    }
    let (pf, sf) = (p as f64, s as f64);
    let sparse_term = |c0: f64| c0 * sf * (1.0 + (pf / sf).ln());
    let ratio = a * a / (sigma * sigma);
    let even = |n: f64| SampleSize {
        regime,
        n1: n / 2.0,
        n2: n / 2.0,
        n,
    };
    Ok(match regime {
        SampleRegime::KnownAll => {
            let delta = consts.delta;
            let n1 = pilot_sample_size(p, s, consts.c0, delta);
            let rate = (ratio / (4.0 * (1.0 + delta * delta))).ln_1p();
            let n2 = (1.0 + consts.epsilon) * ((pf - sf).ln() + sf.ln()) / rate;
            SampleSize {
                regime,
                n1,
                n2,
                n: n1 + n2,
            }
        }
        SampleRegime::KnownA => {
            let second = 2.0 * pf.ln() / (ratio / 8.0).ln_1p() + 1.0;
            even(2.0 * sparse_term(consts.c0).max(second))
        }
        SampleRegime::KnownSigma => {
            let second = 2.0 * pf.ln() / (ratio / 8.0).ln_1p();
            even(2.0 * sparse_term(consts.c0).max(second))
        }
        SampleRegime::FullyAdaptive => {
            let second = 2.0 * pf.ln() / (ratio / 16.0).ln_1p();
            even(2.0 * sparse_term(consts.c0_bar).max(second))
        }
        SampleRegime::SubGaussian => {
            let second = pf.ln() / ratio;
            even(consts.c_subgaussian * sparse_term(1.0).max(second))
        }
    })
}

/// Signal-to-noise zone of the phase-transition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseZone {
    /// `a/sigma <= 1/sqrt(s)`.
    Low,
    /// `1/sqrt(s) < a/sigma < 1`.
    Intermediate,
    /// `a/sigma >= 1`.
    High,
}

/// One row of the phase-transition table, with the sample-size expressions
/// evaluable at any `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub zone: PhaseZone,
    pub a: f64,
    pub sigma: f64,
    pub s: usize,
}

impl PhaseRow {
    /// Upper bound on the sample size needed by the maximum-likelihood decoder.
    pub fn upper(&self, p: usize) -> f64 {
        let (pf, sf) = (p as f64, self.s as f64);
        let r = self.a * self.a / (self.sigma * self.sigma);
        match self.zone {
            PhaseZone::Low => (pf - sf).ln() / r,
            PhaseZone::Intermediate => self.intermediate(pf, sf, r),
            PhaseZone::High => sf * (pf / sf).ln(),
        }
    }

    /// Lower bound on the sample size any method needs.
    pub fn lower(&self, p: usize) -> f64 {
        let (pf, sf) = (p as f64, self.s as f64);
        let r = self.a * self.a / (self.sigma * self.sigma);
        match self.zone {
            PhaseZone::Low => (pf - sf).ln() / r,
            PhaseZone::Intermediate => self.intermediate(pf, sf, r),
            PhaseZone::High => sf * (pf / sf).ln() / (sf * r).ln_1p(),
        }
    }

    fn intermediate(&self, pf: f64, sf: f64, r: f64) -> f64 {
        let first = sf * (pf / sf).ln() / (sf * r).ln_1p();
        let second = (pf - sf).ln() / r.ln_1p();
        first.max(second)
    }

    pub fn describe(&self) -> &'static str {
        match self.zone {
            PhaseZone::Low => "sigma^2 log(p-s) / a^2 (upper and lower)",
            PhaseZone::Intermediate => {
                "s log(p/s) / log(1 + s a^2/sigma^2) v log(p-s) / log(1 + a^2/sigma^2) (upper and lower)"
            }
            PhaseZone::High => "upper s log(p/s); lower s log(p/s) / log(1 + s a^2/sigma^2)",
        }
    }
}

/// Classifies `a/sigma` against `1/sqrt(s)` and `1`.
pub fn phase_table_regime(a: f64, sigma: f64, s: usize) -> Result<PhaseRow> {
    check_positive("a", a)?;
    check_positive("sigma", sigma)?;
    if s == 0 {
        return Err(Error::invalid("s must be positive"));
    }
    let snr = a / sigma;
    let zone = if snr <= 1.0 / (s as f64).sqrt() {
        PhaseZone::Low
    } else if snr >= 1.0 {
        PhaseZone::High
    } else {
        PhaseZone::Intermediate
    };
    Ok(PhaseRow { zone, a, sigma, s })
}

/// Every bound evaluated at one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub parameters: ProblemInstance,
    pub constants: BoundConstants,
    pub monte_carlo: MonteCarloConfig,
    /// `psi_plus(n, p, s, a, sigma)`.
    pub psi_plus: Bound,
    /// `psi(n, p, s, a, sigma)`.
    pub psi: Bound,
    pub lower_thm1: Bound,
    pub lower_prop3: Bound,
    pub lower_thm3: Bound,
    pub upper_thm2: UpperBounds,
    pub upper_thm4: UpperBounds,
    /// `B` implied by `n2`, used by `upper_cor2`.
    pub cor2_b: f64,
    pub upper_cor2: Bound,
    pub ml_decoder: Bound,
    pub sufficient_n: Vec<SampleSize>,
    pub phase_zone: PhaseZone,
    pub phase_upper: f64,
    pub phase_lower: f64,
}

pub fn bounds_report(
    problem: &ProblemInstance,
    consts: &BoundConstants,
    mc: &MonteCarloConfig,
) -> Result<BoundsReport> {
    problem.validate()?;
    consts.validate()?;
    mc.validate()?;
    let &ProblemInstance {
        n,
        p,
        s,
        a,
        sigma,
        n1,
        n2,
    } = problem;
    check_positive("sigma", sigma)?;

    let psi_or_absent = |r: Result<Estimate>| match r {
        Ok(est) => Ok(Bound::estimate(est)),
        Err(Error::RegimeViolation(reason)) => Ok(Bound::absent(reason)),
        Err(e) => Err(e),
    };
    let psi_plus = psi_or_absent(psi_plus_mc(n, p, s, a, sigma, mc))?;
    let psi = psi_or_absent(psi_mc(n, p, s, a, sigma, mc))?;
    let s_prime = consts.s_prime.unwrap_or(s as f64 / 2.0);
    let lower_thm1 = match psi_plus.get() {
        Some(v) => Bound::value(lower_bound_from_psi_plus(v, s, s_prime)?),
        None => psi_plus.clone(),
    };

    let cor2_b = if 2 * s <= p && s < p {
        implied_b(n2, p, s, a, sigma, consts.delta)
    } else {
        f64::NAN
    };
    let upper_cor2 = if a > sigma / 3f64.sqrt() {
        Bound::absent(format!(
            "condition a <= sigma/sqrt(3) fails (a={a}, sigma={sigma})"
        ))
    } else if !(cor2_b > 1.0) {
        Bound::absent(format!("n2 implies B = {cor2_b}, need B > 1"))
    } else {
        Bound::value(upper_bound_cor2(p, s, cor2_b, consts.c1, consts.c2)?)
    };
    let ml_decoder = match consts.b_star {
        Some(b) if 2 * s <= p => Bound::value(ml_decoder_bound(p, s, b)),
        Some(_) => Bound::absent(format!("condition s <= p/2 fails (s={s}, p={p})")),
        None => Bound::absent("b_star not supplied"),
    };
    let sufficient_n = if s < p {
        SampleRegime::ALL
            .iter()
            .map(|&r| sufficient_n(p, s, a, sigma, r, consts))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let row = phase_table_regime(a, sigma, s)?;

    Ok(BoundsReport {
        parameters: *problem,
        constants: consts.clone(),
        monte_carlo: mc.clone(),
        psi_plus,
        psi,
        lower_thm1,
        lower_prop3: lower_bound_prop3(n, p, s, a, sigma),
        lower_thm3: lower_bound_thm3(n, p, s, a, sigma, consts.c),
        upper_thm2: upper_bound_thm2(n1, n2, p, s, a, sigma, consts, mc)?,
        upper_thm4: upper_bound_thm4(n1, n2, p, s, a, sigma, consts)?,
        cor2_b,
        upper_cor2,
        ml_decoder,
        sufficient_n,
        phase_zone: row.zone,
        phase_upper: row.upper(p),
        phase_lower: row.lower(p),
    })
}
