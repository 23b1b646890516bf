//! Dense kernels used by the solvers. `X` is always row-major.

use ndarray::{Array1, ArrayView1, ArrayView2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// `X v`.
pub fn mat_vec(x: ArrayView2<'_, f64>, v: ArrayView1<'_, f64>) -> Array1<f64> {
    x.dot(&v)
}

/// `X^T r`, accumulated row by row so that the access pattern stays contiguous.
pub fn mat_t_vec(x: ArrayView2<'_, f64>, r: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut out = Array1::zeros(x.ncols());
    let n = x.nrows();
    let mut i = 0;
    // four rows per pass over `out`
    while i + 4 <= n {
        let (c0, c1, c2, c3) = (r[i], r[i + 1], r[i + 2], r[i + 3]);
        Zip::from(&mut out)
            .and(x.row(i))
            .and(x.row(i + 1))
            .and(x.row(i + 2))
            .and(x.row(i + 3))
            .for_each(|o, &a, &b, &c, &d| *o += c0 * a + c1 * b + c2 * c + c3 * d);
        i += 4;
    }
    for k in i..n {
        out.scaled_add(r[k], &x.row(k));
    }
    out
}

pub fn norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v).sqrt()
}

/// Euclidean norm of every column.
pub fn column_norms(x: ArrayView2<'_, f64>) -> Array1<f64> {
    let mut sq = Array1::<f64>::zeros(x.ncols());
    for row in x.rows() {
        Zip::from(&mut sq).and(&row).for_each(|s, &v| *s += v * v);
    }
    sq.mapv_into(f64::sqrt)
}

/// Largest eigenvalue of `X^T X / m` by power iteration from a seeded
/// Gaussian start vector.
pub fn top_eigenvalue_gram(x: ArrayView2<'_, f64>, steps: usize, seed: u64) -> f64 {
    let m = x.nrows().max(1) as f64;
    let p = x.ncols();
    if p == 0 || x.nrows() == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Array1<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let nv = norm(v.view());
    v /= nv;
    let mut eig = 0.0;
    for _ in 0..steps.max(1) {
        let xv = mat_vec(x, v.view());
        let w = mat_t_vec(x, xv.view()) / m;
        let nw = norm(w.view());
        if nw == 0.0 {
            return 0.0;
        }
        eig = nw;
        v = w / nw;
    }
    eig
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{array, Array2};

    #[test]
    fn transpose_product_matches_ndarray() {
        for n in [1usize, 3, 4, 7, 9] {
            let x = Array2::from_shape_fn((n, 5), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
            let r = Array1::from_shape_fn(n, |i| i as f64 * 0.5 - 1.0);
            let want = x.t().dot(&r);
            let got = mat_t_vec(x.view(), r.view());
            for (a, b) in got.iter().zip(want.iter()) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn column_norms_simple() {
        let x = array![[3.0, 0.0], [4.0, 1.0]];
        assert_eq!(column_norms(x.view()), array![5.0, 1.0]);
    }

    #[test]
    fn power_iteration_on_diagonal() {
        let x = array![[2.0, 0.0], [0.0, 1.0]];
        let eig = top_eigenvalue_gram(x.view(), 200, 1);
        assert_relative_eq!(eig, 2.0, epsilon = 1e-9);
    }
}
