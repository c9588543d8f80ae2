//! Reference implementations that share no code with the library: a
//! textbook recursive Cox–de Boor evaluator, a composite Simpson Gram
//! matrix and a densely discretized PCA.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_grid(m: usize) -> Vec<f64> {
    (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
}

pub fn random_coeffs(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Clamped knot vector on [0, 1] with equally spaced interior knots.
pub fn clamped_knots(order: usize, num_basis: usize) -> Vec<f64> {
    let interior = num_basis - order;
    let mut knots = vec![0.0; order];
    knots.extend((1..=interior).map(|i| i as f64 / (interior + 1) as f64));
    knots.extend(std::iter::repeat_n(1.0, order));
    knots
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 { 0.0 } else { num / den }
}

/// `N_{i,degree}(t)` by the defining recursion; the last non-empty span is
/// closed on the right so that `t = 1` is covered.
pub fn cox_de_boor(knots: &[f64], i: usize, degree: usize, t: f64) -> f64 {
    if degree == 0 {
        let (a, b) = (knots[i], knots[i + 1]);
        let last_span = b == *knots.last().unwrap() && a < b;
        return if (a <= t && t < b) || (last_span && t == b) { 1.0 } else { 0.0 };
    }
    ratio(t - knots[i], knots[i + degree] - knots[i]) * cox_de_boor(knots, i, degree - 1, t)
        + ratio(knots[i + degree + 1] - t, knots[i + degree + 1] - knots[i + 1])
            * cox_de_boor(knots, i + 1, degree - 1, t)
}

pub fn oracle_basis(order: usize, num_basis: usize, t: f64) -> Vec<f64> {
    let knots = clamped_knots(order, num_basis);
    (0..num_basis).map(|i| cox_de_boor(&knots, i, order - 1, t)).collect()
}

pub fn oracle_curve(order: usize, coeffs: &[f64], t: f64) -> f64 {
    oracle_basis(order, coeffs.len(), t)
        .iter()
        .zip(coeffs)
        .map(|(b, c)| b * c)
        .sum()
}

/// Gram matrix by composite Simpson on each knot span with `panels`
/// (even) sub-intervals per span.
pub fn simpson_gram(order: usize, num_basis: usize, panels: usize) -> DMatrix<f64> {
    let knots = clamped_knots(order, num_basis);
    let mut breaks: Vec<f64> = knots.clone();
    breaks.dedup();
    let mut gram = DMatrix::zeros(num_basis, num_basis);
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = (b - a) / panels as f64;
        for s in 0..=panels {
            let weight = if s == 0 || s == panels {
                1.0
            } else if s % 2 == 1 {
                4.0
            } else {
                2.0
            } * h
                / 3.0;
            // Stay inside the span so the half-open convention does not
            // pick the neighbouring polynomial piece at the right end.
            let t = if s == panels { b - 1e-15 * (b - a) } else { a + s as f64 * h };
            let v = oracle_basis(order, num_basis, t);
            for i in 0..num_basis {
                for j in 0..num_basis {
                    gram[(i, j)] += weight * v[i] * v[j];
                }
            }
        }
    }
    gram
}

/// Eigenvalues (descending) of the sample covariance operator of the
/// curves, approximated on `points` midpoints.
pub fn discretized_pca(order: usize, coeffs: &DMatrix<f64>, points: usize) -> Vec<f64> {
    let n = coeffs.nrows();
    let p = coeffs.ncols();
    let ts: Vec<f64> = (0..points).map(|i| (i as f64 + 0.5) / points as f64).collect();
    let mut phi = DMatrix::zeros(points, p);
    for (k, t) in ts.iter().enumerate() {
        for (j, v) in oracle_basis(order, p, *t).into_iter().enumerate() {
            phi[(k, j)] = v;
        }
    }
    let mut values = coeffs * phi.transpose();
    for k in 0..points {
        let mean = values.column(k).mean();
        values.column_mut(k).add_scalar_mut(-mean);
    }
    let cov = &values * values.transpose() / ((n - 1) as f64 * points as f64);
    let mut eig: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig
}

pub fn quad_form(gram: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        for j in 0..b.len() {
            s += a[i] * gram[(i, j)] * b[j];
        }
    }
    s
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
