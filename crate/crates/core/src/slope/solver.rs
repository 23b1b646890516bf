use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::prox::prox_with_weights;
use super::{sorted_l1_unchecked, LambdaWeights, SolverConfig, StepRule};
use crate::error::{Error, Result};
use crate::linalg::{mat_t_vec, mat_vec, norm, top_eigenvalue_gram};
use crate::model::SparseVector;

/// Result of [`slope_solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub beta: SparseVector,
    /// `||Y - X b||^2 / (2m) + noise_scale * |b|_*` at `beta`.
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Step constant in effect when the iteration stopped.
    pub lipschitz: f64,
}

/// Result of [`sqrt_slope_solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqrtSlopeFit {
    pub beta: SparseVector,
    /// `||Y - X b|| / sqrt(n1) + 2 |b|_*` at `beta`.
    pub objective: f64,
    pub outer_iterations: usize,
    /// Residual scale `||Y - X b|| / sqrt(n1)` at `beta`.
    pub sigma_hat: f64,
    pub converged: bool,
    /// Objective after each outer update, starting from `b = 0`.
    pub history: Vec<f64>,
}

fn check_dims(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: &LambdaWeights,
) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.ncols() != lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            found: lambda.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::invalid("design has no rows"));
    }
    Ok(())
}

fn half_mean_sq(r: &Array1<f64>) -> f64 {
    r.dot(r) / (2.0 * r.len() as f64)
}

/// Minimises `||Y - X b||^2 / (2m) + noise_scale * |b|_*` over `b`, where `m`
/// is the number of rows, by accelerated proximal gradient with restarts.
///
/// Hitting `cfg.max_iterations` is reported through `converged = false`.
pub fn slope_solve(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    lambda: &LambdaWeights,
    noise_scale: f64,
    cfg: &SolverConfig,
) -> Result<SlopeFit> {
    check_dims(x, y, lambda)?;
    cfg.validate()?;
    if !(noise_scale.is_finite() && noise_scale >= 0.0) {
        return Err(Error::invalid(format!(
            "noise scale must be nonnegative, got {noise_scale}"
        )));
    }
    let lipschitz = top_eigenvalue_gram(x, cfg.power_iterations, cfg.power_seed);
    let start = Array1::zeros(x.ncols());
    Ok(fista(
        x,
        y,
        lambda.weights(),
        noise_scale,
        cfg,
        start,
        lipschitz,
    ))
}

/// Monotone FISTA. Only candidates that do not increase the objective are
/// accepted, so the returned iterate is the best one seen.
pub(crate) fn fista(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    weights: &[f64],
    noise_scale: f64,
    cfg: &SolverConfig,
    start: Array1<f64>,
    lipschitz: f64,
) -> SlopeFit {
    let m = x.nrows() as f64;
    let mut lip = lipschitz.max(f64::MIN_POSITIVE.sqrt());

    let mut beta = start;
    let mut fitted = mat_vec(x, beta.view());
    let objective_of = |fit: &Array1<f64>, b: &Array1<f64>| {
        let r = &y - fit;
        half_mean_sq(&r) + noise_scale * sorted_l1_unchecked(b.view(), weights)
    };
    let mut obj = objective_of(&fitted, &beta);

    let mut z = beta.clone();
    let mut xz = fitted.clone();
    let mut t = 1.0f64;
    let mut restarted = true;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        let resid_z = &xz - &y;
        let grad = mat_t_vec(x, resid_z.view()) / m;
        let (cand, x_cand) = loop {
            let step = &z - &(&grad / lip);
            let cand = prox_with_weights(step.view(), weights, noise_scale / lip);
            let x_cand = mat_vec(x, cand.view());
            if cfg.step_rule == StepRule::Backtracking {
                let diff = &cand - &z;
                let r_cand = &x_cand - &y;
                let upper = half_mean_sq(&resid_z) + grad.dot(&diff) + 0.5 * lip * diff.dot(&diff);
                if half_mean_sq(&r_cand) > upper * (1.0 + 1e-12) && lip < f64::MAX / 4.0 {
                    lip *= 2.0;
                    continue;
                }
            }
            break (cand, x_cand);
        };
        let cand_obj = objective_of(&x_cand, &cand);

        if cand_obj <= obj {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let momentum = (t - 1.0) / t_next;
            z = &cand + &((&cand - &beta) * momentum);
            xz = &x_cand + &((&x_cand - &fitted) * momentum);
            t = t_next;
            restarted = false;
            let change = obj - cand_obj;
            beta = cand;
            fitted = x_cand;
            obj = cand_obj;
            if change <= cfg.tolerance * obj.abs() {
                converged = true;
                break;
            }
        } else if restarted {
            // a plain proximal step from the current iterate went uphill, so
            // the step constant is too small
            lip *= 1.5;
        } else {
            z = beta.clone();
            xz = fitted.clone();
            t = 1.0;
            restarted = true;
        }
    }

    SlopeFit {
        beta: SparseVector::from(beta),
        objective: obj,
        iterations,
        converged,
        lipschitz: lip,
    }
}

/// Square-root SLOPE: minimises `||Y1 - X1 b|| / sqrt(n1) + 2 |b|_*`.
///
/// Alternates between the residual scale `sigma = ||Y1 - X1 b|| / sqrt(n1)`
/// and a warm-started SLOPE solve with noise scale `2 sigma`. Each inner solve
/// starts at the current iterate and never increases its own objective, which
/// makes the outer objective non-increasing.
pub fn sqrt_slope_solve(
    x1: ArrayView2<'_, f64>,
    y1: ArrayView1<'_, f64>,
    lambda: &LambdaWeights,
    cfg: &SolverConfig,
) -> Result<SqrtSlopeFit> {
    check_dims(x1, y1, lambda)?;
    cfg.validate()?;
    let p = x1.ncols();
    let root_n = (x1.nrows() as f64).sqrt();
    let y_norm = norm(y1);
    let mut beta = Array1::zeros(p);
    let mut sigma = y_norm / root_n;
    let mut obj = sigma;
    let mut history = vec![obj];
    if y_norm == 0.0 {
        return Ok(SqrtSlopeFit {
            beta: SparseVector::from(beta),
            objective: 0.0,
            outer_iterations: 0,
            sigma_hat: 0.0,
            converged: true,
            history,
        });
    }
    let floor = 1e-12 * y_norm / root_n;
    let lipschitz = top_eigenvalue_gram(x1, cfg.power_iterations, cfg.power_seed);
    let weights = lambda.weights();

    let mut converged = false;
    let mut outer = 0;
    while outer < cfg.max_outer_iterations {
        if sigma <= floor {
            converged = true;
            break;
        }
        outer += 1;
        let fit = fista(x1, y1, weights, 2.0 * sigma, cfg, beta.clone(), lipschitz);
        let resid = &y1 - &mat_vec(x1, fit.beta.as_array().view());
        let new_sigma = norm(resid.view()) / root_n;
        let new_obj = new_sigma + 2.0 * sorted_l1_unchecked(fit.beta.as_array().view(), weights);
        if new_obj > obj {
            // only possible through rounding; keep the better iterate
            history.push(obj);
            converged = fit.converged;
            break;
        }
        let change = obj - new_obj;
        beta = fit.beta.as_array().to_owned();
        sigma = new_sigma;
        obj = new_obj;
        history.push(obj);
        if change <= cfg.tolerance * obj {
            converged = fit.converged;
            break;
        }
    }

    Ok(SqrtSlopeFit {
        beta: SparseVector::from(beta),
        objective: obj,
        outer_iterations: outer,
        sigma_hat: sigma,
        converged,
        history,
    })
}
