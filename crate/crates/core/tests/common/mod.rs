//! Reference computations shared by the integration tests. They avoid the
//! library's own algorithms so that agreement means something.

#![allow(dead_code)]

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// `0.5 ||x - v||^2 + scale * sum_j lambda_j |x|_(j)`.
pub fn prox_objective(x: &[f64], v: &[f64], lambda: &[f64], scale: f64) -> f64 {
    let quad: f64 = x.iter().zip(v).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
    let mut mags: Vec<f64> = x.iter().map(|a| a.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    quad + scale * mags.iter().zip(lambda).map(|(m, l)| m * l).sum::<f64>()
}

/// Minimiser of [`prox_objective`] for small `p`.
///
/// A coarse grid search gives a starting value; the refinement then solves
/// the quadratic on every face of the sorted-L1 norm (an ordered partition of
/// the coordinates into tie groups plus a zero group, signs following `v`)
/// in closed form and keeps the best point. The true minimiser lies on one
/// of these faces, so the result is exact up to rounding.
pub fn prox_oracle(v: &[f64], lambda: &[f64], scale: f64) -> Vec<f64> {
    let p = v.len();
    let mut best = grid_search(v, lambda, scale, 7);
    let mut best_val = prox_objective(&best, v, lambda, scale);

    // label p means "zero"; nonzero labels are tie groups ordered by size
    let mut labels = vec![0usize; p];
    loop {
        if let Some(x) = face_minimiser(v, lambda, scale, &labels) {
            let val = prox_objective(&x, v, lambda, scale);
            if val < best_val {
                best_val = val;
                best = x;
            }
        }
        // odometer over (p + 1)^p assignments
        let mut i = 0;
        while i < p {
            labels[i] += 1;
            if labels[i] <= p {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == p {
            break;
        }
    }
    best
}

fn face_minimiser(v: &[f64], lambda: &[f64], scale: f64, labels: &[usize]) -> Option<Vec<f64>> {
    let p = v.len();
    let groups = labels
        .iter()
        .filter(|&&l| l < p)
        .map(|&l| l + 1)
        .max()
        .unwrap_or(0);
    // nonzero group labels must be exactly 0..groups
    for g in 0..groups {
        if !labels.contains(&g) {
            return None;
        }
    }
    let mut x = vec![0.0; p];
    let mut rank = 0;
    for g in 0..groups {
        let members: Vec<usize> = (0..p).filter(|&i| labels[i] == g).collect();
        let k = members.len();
        let abs_sum: f64 = members.iter().map(|&i| v[i].abs()).sum();
        let pen: f64 = lambda[rank..rank + k].iter().sum();
        let c = ((abs_sum - scale * pen) / k as f64).max(0.0);
        for &i in &members {
            x[i] = v[i].signum() * c;
        }
        rank += k;
    }
    Some(x)
}

fn grid_search(v: &[f64], lambda: &[f64], scale: f64, points: usize) -> Vec<f64> {
    let p = v.len();
    let hi = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let axis: Vec<f64> = (0..points)
        .map(|i| -hi + 2.0 * hi * i as f64 / (points - 1) as f64)
        .collect();
    let total = points.pow(p as u32);
    let mut best = vec![0.0; p];
    let mut best_val = f64::INFINITY;
    let mut x = vec![0.0; p];
    for mut code in 0..total {
        for xi in x.iter_mut() {
            *xi = axis[code % points];
            code /= points;
        }
        let val = prox_objective(&x, v, lambda, scale);
        if val < best_val {
            best_val = val;
            best.clone_from(&x);
        }
    }
    best
}

/// Nodes and weights of the `m`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p0 = 1.0;
            }
            dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        nodes[m - 1 - i] = -x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    (nodes, weights)
}

fn normal_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// `psi` (clamped) or `psi_plus` by 2000-point Gauss-Legendre quadrature over
/// the chi density of `||zeta||`.
pub fn psi_quadrature(n: usize, p: usize, s: usize, a: f64, sigma: f64, clamp: bool) -> f64 {
    let k = n as f64;
    let (pf, sf) = (p as f64, s as f64);
    let odds = (pf / sf - 1.0).ln();
    let centre = k.sqrt();
    let (lo, hi) = ((centre - 12.0).max(0.0), centre + 12.0);
    let ln_norm = (k / 2.0 - 1.0) * std::f64::consts::LN_2 + ln_gamma(k / 2.0);
    let (nodes, weights) = gauss_legendre(2000);
    let half = 0.5 * (hi - lo);
    nodes
        .iter()
        .zip(&weights)
        .map(|(&u, &w)| {
            let r = lo + half * (u + 1.0);
            if r <= 0.0 {
                return 0.0;
            }
            let density = ((k - 1.0) * r.ln() - r * r / 2.0 - ln_norm).exp();
            let t = a * r / 2.0 + sigma * sigma * odds / (a * r);
            let margin = a * r - t;
            let margin = if clamp { margin.max(0.0) } else { margin };
            let g = (pf - sf) * normal_tail(t / sigma) + sf * normal_tail(margin / sigma);
            w * half * density * g
        })
        .sum()
}
