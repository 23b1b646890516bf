use ndarray::{Array1, ArrayView1};

use super::LambdaWeights;

/// Proximal operator of `scale * |.|_*`: the unique minimiser of
/// `0.5 ||x - v||^2 + scale * sum_j lambda_j |x|_(j)`.
///
/// Sorts `|v|` in decreasing order, subtracts the scaled weights, projects the
/// result onto the non-increasing cone with a pool-adjacent-violators stack,
/// clamps at zero, then undoes the sort and restores signs.
pub fn prox_sorted_l1(v: ArrayView1<'_, f64>, lambda: &LambdaWeights, scale: f64) -> Array1<f64> {
    assert_eq!(
        v.len(),
        lambda.len(),
        "prox input and weights differ in length"
    );
    prox_with_weights(v, lambda.weights(), scale)
}

pub(crate) fn prox_with_weights(
    v: ArrayView1<'_, f64>,
    weights: &[f64],
    scale: f64,
) -> Array1<f64> {
    let p = v.len();
    if scale == 0.0 || p == 0 {
        return v.to_owned();
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_unstable_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()));

    // (first index, length, sum)
    let mut blocks: Vec<(usize, usize, f64)> = Vec::with_capacity(p);
    for (k, &i) in order.iter().enumerate() {
        blocks.push((k, 1, v[i].abs() - scale * weights[k]));
        while blocks.len() > 1 {
            let (_, len_b, sum_b) = blocks[blocks.len() - 1];
            let (_, len_a, sum_a) = blocks[blocks.len() - 2];
            if sum_b * len_a as f64 >= sum_a * len_b as f64 {
                blocks.pop();
                let top = blocks.last_mut().unwrap();
                top.1 += len_b;
                top.2 += sum_b;
            } else {
                break;
            }
        }
    }

    let mut out = Array1::zeros(p);
    for (start, len, sum) in blocks {
        let level = (sum / len as f64).max(0.0);
        if level == 0.0 {
            continue;
        }
        for &i in &order[start..start + len] {
            out[i] = level.copysign(v[i]);
        }
    }
    out
}
