//! Median-of-means selector for heavy-tailed noise and outliers.
//!
//! The second subsample is cut into `K` disjoint blocks of `q = floor(n2/K)`
//! rows. Each block gives a debiased estimate
//! `Z = b + X_b^T (Y_b - X_b b) / q` around the pilot `b`; the componentwise
//! median of the `K` estimates is compared against `c4 sigma sqrt(log p / n2)`.

use std::ops::Range;

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_t_vec, mat_vec, norm, top_eigenvalue_gram};
use crate::model::{
    split_sample, Dataset, ProblemInstance, SparseVector, SplitScheme, SupportMask,
};
use crate::slope::{prox_sorted_l1, sqrt_slope_solve, PilotConfig};
use crate::stats::median_in_place;

/// Default threshold constant `c4`.
pub const DEFAULT_C4: f64 = 4.0;

/// First-stage estimator used by [`mom_select`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PilotKind {
    /// Square-root SLOPE on the first subsample.
    SqrtSlope,
    /// Proximal gradient on the SLOPE objective where every step uses the
    /// block with the median loss. A robust heuristic, not an exact solver.
    MomPilot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomConfig {
    /// Number of blocks; resolved from `c3` or the default rule when absent.
    pub k: Option<usize>,
    /// `K = floor(c3 log p)` when `k` is absent.
    pub c3: Option<f64>,
    pub c4: f64,
    pub pilot: PilotKind,
    /// Noise scale entering the threshold.
    pub sigma: f64,
}

impl MomConfig {
    pub fn new(sigma: f64) -> Self {
        MomConfig {
            k: None,
            c3: None,
            c4: DEFAULT_C4,
            pilot: PilotKind::SqrtSlope,
            sigma,
        }
    }

    pub fn with_blocks(mut self, k: usize) -> Self {
        self.k = Some(k);
        self
    }

    /// Number of blocks for a subsample of `n` rows: the explicit `k`, else
    /// `floor(c3 log p)`, else `min(floor(10 log p), floor(n/4))`.
    pub fn resolve_k(&self, p: usize, n: usize) -> Result<usize> {
        let log_p = (p as f64).ln();
        let k = match (self.k, self.c3) {
            (Some(k), _) => k,
            (None, Some(c3)) => (c3 * log_p).floor() as usize,
            (None, None) => ((10.0 * log_p).floor() as usize).min(n / 4),
        };
        check_blocks(n, k)?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c4.is_finite() && self.c4 > 0.0) {
            return Err(Error::invalid(format!(
                "c4 must be positive, got {}",
                self.c4
            )));
        }
        if let Some(c3) = self.c3 {
            if !(c3.is_finite() && c3 > 0.0) {
                return Err(Error::invalid(format!("c3 must be positive, got {c3}")));
            }
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutlierKind {
    /// Response set to `+-magnitude * max|Y|` and the design row scaled by
    /// `magnitude`.
    AdversarialLargeY,
    /// Row and response replaced by `magnitude * N(0, 1)` draws.
    RandomCorruptRow,
}

/// Rows overwritten after the clean draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub outlier_count: usize,
    pub outlier_kind: OutlierKind,
    pub magnitude: f64,
    /// Half-open row range the outliers are drawn from; the whole sample when
    /// absent.
    #[serde(default)]
    pub rows: Option<(usize, usize)>,
}

impl ContaminationSpec {
    /// The row range for a sample of `n` rows, after validation.
    pub fn row_range(&self, n: usize) -> Result<Range<usize>> {
        let (lo, hi) = self.rows.unwrap_or((0, n));
        if lo >= hi || hi > n {
            return Err(Error::invalid(format!(
                "contamination rows {lo}..{hi} invalid for n={n}"
            )));
        }
        if self.outlier_count >= n || self.outlier_count > hi - lo {
            return Err(Error::invalid(format!(
                "{} outliers do not fit in rows {lo}..{hi} of n={n}",
                self.outlier_count
            )));
        }
        if !(self.magnitude.is_finite() && self.magnitude > 0.0) {
            return Err(Error::invalid("outlier magnitude must be positive"));
        }
        Ok(lo..hi)
    }
}

fn check_blocks(n: usize, k: usize) -> Result<()> {
    if k <= 1 || k >= n {
        return Err(Error::invalid(format!(
            "block count K={k} must satisfy 1 < K < {n}"
        )));
    }
    Ok(())
}

/// `K` consecutive blocks of `floor(n2/K)` indices (0-based); trailing indices
/// that do not fill a block are left out.
pub fn partition_blocks(n2: usize, k: usize) -> Result<Vec<Range<usize>>> {
    check_blocks(n2, k)?;
    Ok(blocks_unchecked(n2, k))
}

fn blocks_unchecked(n: usize, k: usize) -> Vec<Range<usize>> {
    let q = n / k;
    (0..k).map(|i| i * q..(i + 1) * q).collect()
}

/// Row `i` is `b + X_i^T (Y_i - X_i b) / q` for block `i`.
pub fn mom_debiased(
    x2: ArrayView2<'_, f64>,
    y2: ArrayView1<'_, f64>,
    beta_star: &SparseVector,
    blocks: &[Range<usize>],
) -> Result<Array2<f64>> {
    if x2.nrows() != y2.len() {
        return Err(Error::DimensionMismatch {
            expected: x2.nrows(),
            found: y2.len(),
        });
    }
    if x2.ncols() != beta_star.len() {
        return Err(Error::DimensionMismatch {
            expected: x2.ncols(),
            found: beta_star.len(),
        });
    }
    if let Some(b) = blocks.iter().find(|b| b.is_empty() || b.end > x2.nrows()) {
        return Err(Error::invalid(format!(
            "block {}..{} is empty or out of range",
            b.start, b.end
        )));
    }
    let beta = beta_star.as_array();
    let resid = &y2 - &mat_vec(x2, beta);
    let mut z = Array2::zeros((blocks.len(), x2.ncols()));
    for (mut row, block) in z.rows_mut().into_iter().zip(blocks) {
        let q = block.len() as f64;
        let corr = mat_t_vec(
            x2.slice(s![block.clone(), ..]),
            resid.slice(s![block.clone()]),
        );
        row.assign(&(&beta + &(corr / q)));
    }
    Ok(z)
}

/// Median of every column; even row counts use the midpoint of the two
/// middle order statistics.
pub fn componentwise_median(z: ArrayView2<'_, f64>) -> Array1<f64> {
    assert!(z.nrows() > 0, "median over zero blocks");
    let mut scratch = vec![0.0; z.nrows()];
    z.axis_iter(Axis(1))
        .map(|col| {
            scratch.iter_mut().zip(col).for_each(|(s, v)| *s = *v);
            median_in_place(&mut scratch)
        })
        .collect()
}

/// `c4 sigma sqrt(log p / n2)`.
pub fn mom_threshold(sigma: f64, p: usize, n2: usize, c4: f64) -> f64 {
    c4 * sigma * ((p as f64).ln() / n2 as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomSelection {
    pub support: SupportMask,
    pub blocks: usize,
    pub block_size: usize,
    pub threshold: f64,
    pub pilot_converged: bool,
}

/// Thresholds the block medians around a given pilot `beta_star`.
pub fn mom_select_with_pilot(
    x2: ArrayView2<'_, f64>,
    y2: ArrayView1<'_, f64>,
    beta_star: &SparseVector,
    cfg: &MomConfig,
) -> Result<MomSelection> {
    cfg.validate()?;
    let (n2, p) = x2.dim();
    let k = cfg.resolve_k(p, n2)?;
    let blocks = blocks_unchecked(n2, k);
    let z = mom_debiased(x2, y2, beta_star, &blocks)?;
    let med = componentwise_median(z.view());
    let t = mom_threshold(cfg.sigma, p, n2, cfg.c4);
    Ok(MomSelection {
        support: SupportMask {
            bits: med.iter().map(|m| m.abs() > t).collect(),
        },
        blocks: k,
        block_size: n2 / k,
        threshold: t,
        pilot_converged: true,
    })
}

/// Pilot estimate on the first subsample according to `cfg.pilot`. Returns
/// the estimate and whether its iteration converged.
pub fn mom_pilot_estimate(
    x1: ArrayView2<'_, f64>,
    y1: ArrayView1<'_, f64>,
    cfg: &MomConfig,
    pilot: &PilotConfig,
) -> Result<(SparseVector, bool)> {
    let lambda = pilot.weights(x1.ncols(), x1.nrows())?;
    match cfg.pilot {
        PilotKind::SqrtSlope => {
            let fit = sqrt_slope_solve(x1, y1, &lambda, &pilot.solver)?;
            Ok((fit.beta, fit.converged))
        }
        PilotKind::MomPilot => {
            let k = cfg.resolve_k(x1.ncols(), x1.nrows())?;
            median_block_descent(x1, y1, &lambda, k, pilot)
        }
    }
}

/// Proximal gradient on `||Y - X b||^2 / (2m) + 2 sigma |b|_*` in which both
/// the gradient and the scale `sigma` come from the block whose loss is the
/// median across blocks.
fn median_block_descent(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: &crate::slope::LambdaWeights,
    k: usize,
    pilot: &PilotConfig,
) -> Result<(SparseVector, bool)> {
    let cfg = &pilot.solver;
    cfg.validate()?;
    let blocks = blocks_unchecked(x.nrows(), k);
    let q = blocks[0].len() as f64;
    let lip = blocks
        .iter()
        .map(|b| {
            top_eigenvalue_gram(
                x.slice(s![b.clone(), ..]),
                cfg.power_iterations,
                cfg.power_seed,
            )
        })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE.sqrt());
    let mut beta = Array1::<f64>::zeros(x.ncols());
    let mut losses = vec![0.0; k];
    let step_tol = cfg.tolerance.sqrt();
    for _ in 0..cfg.max_iterations {
        let resid = &y - &mat_vec(x, beta.view());
        for (l, b) in losses.iter_mut().zip(&blocks) {
            let r = resid.slice(s![b.clone()]);
            *l = r.dot(&r) / (2.0 * q);
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.select_nth_unstable_by(k / 2, |&i, &j| losses[i].total_cmp(&losses[j]));
        let pick = &blocks[order[k / 2]];
        let sigma = (2.0 * losses[order[k / 2]]).sqrt();
        let grad = mat_t_vec(x.slice(s![pick.clone(), ..]), resid.slice(s![pick.clone()])) / -q;
        let next = prox_sorted_l1((&beta - &(grad / lip)).view(), lambda, 2.0 * sigma / lip);
        let change = norm((&next - &beta).view());
        let size = norm(next.view());
        beta = next;
        if change <= step_tol * size.max(f64::MIN_POSITIVE) {
            return Ok((SparseVector::from(beta), true));
        }
    }
    Ok((SparseVector::from(beta), false))
}

/// Runs the median-of-means selector and returns the estimated support.
pub fn mom_select(
    data: &Dataset,
    problem: &ProblemInstance,
    cfg: &MomConfig,
    pilot: &PilotConfig,
    scheme: &SplitScheme,
) -> Result<SupportMask> {
    Ok(mom_select_detailed(data, problem, cfg, pilot, scheme)?.support)
}

pub fn mom_select_detailed(
    data: &Dataset,
    problem: &ProblemInstance,
    cfg: &MomConfig,
    pilot: &PilotConfig,
    scheme: &SplitScheme,
) -> Result<MomSelection> {
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
    cfg.validate()?;
    let (first, second) = split_sample(data, scheme)?;
    cfg.resolve_k(data.p(), second.n())?;
    let (beta_star, converged) = mom_pilot_estimate(first.x(), first.y(), cfg, pilot)?;
    let mut out = mom_select_with_pilot(second.x(), second.y(), &beta_star, cfg)?;
    out.pilot_converged = converged;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((n, p), || StandardNormal.sample(&mut rng))
    }

    fn normal_vec(n: usize, seed: u64) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn block_partitions() {
        assert_eq!(partition_blocks(10, 3).unwrap(), vec![0..3, 3..6, 6..9]);
        assert_eq!(
            partition_blocks(8, 4).unwrap(),
            vec![0..2, 2..4, 4..6, 6..8]
        );
        assert!(partition_blocks(5, 5).is_err());
        assert!(partition_blocks(5, 1).is_err());
    }

    #[test]
    fn block_count_resolution() {
        let cfg = MomConfig::new(1.0);
        assert_eq!(cfg.resolve_k(500, 3000).unwrap(), 62);
        assert_eq!(cfg.resolve_k(500, 100).unwrap(), 25);
        assert_eq!(cfg.clone().with_blocks(7).resolve_k(500, 100).unwrap(), 7);
        let theory = MomConfig {
            c3: Some(500.0),
            ..MomConfig::new(1.0)
        };
        assert!(theory.resolve_k(500, 3000).is_err());
        let c3 = MomConfig {
            c3: Some(2.0),
            ..MomConfig::new(1.0)
        };
        assert_eq!(c3.resolve_k(100, 3000).unwrap(), 9);
    }

    #[test]
    fn exact_pilot_gives_signal_in_every_block() {
        let x = gaussian(40, 5, 2);
        let beta = SparseVector::new(vec![0.0, 1.0, 0.0, -3.0, 0.0]);
        let y = x.dot(&beta.as_array());
        let z = mom_debiased(x.view(), y.view(), &beta, &partition_blocks(40, 4).unwrap()).unwrap();
        for row in z.rows() {
            for (a, b) in row.iter().zip(&beta.values) {
                assert_relative_eq!(*a, *b, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn zero_pilot_gives_block_correlations() {
        let x = gaussian(12, 3, 5);
        let y = normal_vec(12, 6);
        let blocks = partition_blocks(12, 3).unwrap();
        let z = mom_debiased(x.view(), y.view(), &SparseVector::zeros(3), &blocks).unwrap();
        for (i, b) in blocks.iter().enumerate() {
            let xb = x.slice(s![b.clone(), ..]);
            let want = xb.t().dot(&y.slice(s![b.clone()])) / 4.0;
            for j in 0..3 {
                assert_relative_eq!(z[[i, j]], want[j], epsilon = 1e-13);
            }
        }
    }

    proptest! {
        #[test]
        fn residual_form_matches_literal_formula(seed in 0u64..500, p in 1usize..8, k in 2usize..5) {
            let n = 4 * k + 3;
            let x = gaussian(n, p, seed);
            let y = normal_vec(n, seed + 7);
            let b = normal_vec(p, seed + 9);
            let blocks = partition_blocks(n, k).unwrap();
            let z = mom_debiased(x.view(), y.view(), &SparseVector::from(b.clone()), &blocks).unwrap();
            for (i, block) in blocks.iter().enumerate() {
                let xb = x.slice(s![block.clone(), ..]);
                let q = block.len() as f64;
                let gram = xb.t().dot(&xb) / q - Array2::<f64>::eye(p);
                let lit = xb.t().dot(&y.slice(s![block.clone()])) / q - gram.dot(&b);
                for j in 0..p {
                    prop_assert!((z[[i, j]] - lit[j]).abs() <= 1e-10 * lit[j].abs().max(1.0));
                }
            }
        }

        #[test]
        fn median_is_row_permutation_invariant_and_monotone(
            vals in proptest::collection::vec(-10.0..10.0f64, 12),
            bump in 0.0..5.0f64,
            idx in 0usize..6,
        ) {
            let z = Array2::from_shape_vec((6, 2), vals).unwrap();
            let med = componentwise_median(z.view());
            let mut rev = z.clone();
            rev.invert_axis(Axis(0));
            prop_assert_eq!(componentwise_median(rev.view()), med.clone());
            let mut up = z.clone();
            up[[idx, 0]] += bump;
            prop_assert!(componentwise_median(up.view())[0] >= med[0]);
        }

        #[test]
        fn median_bounded_under_minority_corruption(
            clean in proptest::collection::vec(-1.0..1.0f64, 9),
            junk in proptest::collection::vec(-1e9..1e9f64, 3),
        ) {
            // 9 blocks, 3 corrupted: fewer than ceil(9/2) - 1 = 4
            let mut col = clean.clone();
            col[..3].copy_from_slice(&junk);
            let z = Array2::from_shape_vec((9, 1), col).unwrap();
            let m = componentwise_median(z.view())[0];
            prop_assert!(m.abs() <= 1.0);
        }
    }

    #[test]
    fn median_examples() {
        assert_eq!(
            componentwise_median(array![[1.0], [2.0], [3.0]].view())[0],
            2.0
        );
        assert_eq!(componentwise_median(array![[1.0], [3.0]].view())[0], 2.0);
        let z = array![[0.5, -1.0], [0.5, -1.0], [0.5, -1.0], [0.5, -1.0]];
        assert_eq!(componentwise_median(z.view()), array![0.5, -1.0]);
    }

    #[test]
    fn threshold_examples() {
        // p = e^n2 up to rounding of p to an integer
        assert_relative_eq!(mom_threshold(1.0, 148, 5, 4.0), 4.0, max_relative = 1e-3);
        assert_relative_eq!(mom_threshold(2.0, 100, 400, 4.0), 0.858386, epsilon = 1e-6);
        assert_relative_eq!(
            mom_threshold(2.0, 100, 400, 4.0),
            2.0 * mom_threshold(1.0, 100, 400, 4.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn single_block_reduces_to_full_sample_debiasing() {
        let x = gaussian(30, 4, 8);
        let y = normal_vec(30, 9);
        let b = SparseVector::new(vec![0.3, 0.0, -1.0, 2.0]);
        let z = mom_debiased(x.view(), y.view(), &b, &blocks_unchecked(30, 1)).unwrap();
        let med = componentwise_median(z.view());
        let want = &b.as_array() + &(x.t().dot(&(&y - &x.dot(&b.as_array()))) / 30.0);
        for j in 0..4 {
            assert_relative_eq!(med[j], want[j], epsilon = 1e-12);
        }
    }

    #[test]
    fn noiseless_exact_pilot_recovers_support() {
        let (n, p) = (200, 10);
        let x = gaussian(n, p, 3);
        let mut beta = SparseVector::zeros(p);
        beta.values[1] = 1.0;
        beta.values[6] = -1.0;
        let y = x.dot(&beta.as_array());
        let cfg = MomConfig::new(1.0).with_blocks(5);
        let sel = mom_select_with_pilot(x.view(), y.view(), &beta, &cfg).unwrap();
        assert!(1.0 > 2.0 * sel.threshold);
        assert_eq!(sel.support, beta.support());
    }

    #[test]
    fn median_block_pilot_tracks_signal_on_clean_data() {
        let (n, p) = (600, 40);
        let x = gaussian(n, p, 4);
        let mut beta = Array1::zeros(p);
        beta[3] = 2.0;
        beta[20] = -2.0;
        let y = x.dot(&beta) + normal_vec(n, 5) * 0.5;
        let cfg = MomConfig {
            pilot: PilotKind::MomPilot,
            ..MomConfig::new(0.5).with_blocks(15)
        };
        let (est, _) =
            mom_pilot_estimate(x.view(), y.view(), &cfg, &PilotConfig::practical()).unwrap();
        let err = norm((&est.as_array() - &beta).view());
        assert!(err < 1.0, "error {err}");
    }

    #[test]
    fn contamination_range_checks() {
        let spec = ContaminationSpec {
            outlier_count: 3,
            outlier_kind: OutlierKind::AdversarialLargeY,
            magnitude: 1e3,
            rows: Some((5, 10)),
        };
        assert_eq!(spec.row_range(10).unwrap(), 5..10);
        assert!(spec.row_range(8).is_err());
        let too_many = ContaminationSpec {
            outlier_count: 6,
            ..spec.clone()
        };
        assert!(too_many.row_range(10).is_err());
    }
}
