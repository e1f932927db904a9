#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use relational_kmeans::SquaredDissimilarityMatrix;

/// Symmetric, zero-diagonal, entries uniform in `[0, 10)`. Almost always
/// non-Euclidean for n ≥ 4.
pub fn random_matrix<R: Rng>(n: usize, rng: &mut R) -> SquaredDissimilarityMatrix {
    let mut raw = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(0.0..10.0);
            raw[i][j] = v;
            raw[j][i] = v;
        }
    }
    SquaredDissimilarityMatrix::validate(&raw, None).unwrap()
}

pub fn random_points<R: Rng>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect()
}

/// Zero-sum coefficients: random values minus their mean.
pub fn random_zero_sum<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    for x in &mut v {
        *x -= mean;
    }
    v
}

/// `−½ Σ_i Σ_j λ_i λ_j A_ij` by plain double loop.
pub fn brute_quadratic_form(a: &SquaredDissimilarityMatrix, lambda: &[f64]) -> f64 {
    let n = a.n();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += lambda[i] * lambda[j] * a[(i, j)];
        }
    }
    -0.5 * s
}

/// `‖p_i − mean(S)‖²`-style distance for a subset, by the brute-force form.
pub fn brute_centroid_distance(a: &SquaredDissimilarityMatrix, i: usize, members: &[usize]) -> f64 {
    let mut lambda = vec![0.0; a.n()];
    for &j in members {
        lambda[j] += 1.0 / members.len() as f64;
    }
    lambda[i] -= 1.0;
    brute_quadratic_form(a, &lambda)
}

/// Orthonormal basis of the zero-sum hyperplane (Helmert contrasts) as an
/// `n × (n−1)` matrix.
pub fn helmert_basis(n: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(n, n - 1);
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

/// Restricted spectrum of `−½ J A J`, computed with nalgebra on an explicit
/// Helmert basis. Sorted ascending.
pub fn restricted_spectrum(a: &SquaredDissimilarityMatrix) -> Vec<f64> {
    let n = a.n();
    let am = DMatrix::from_row_slice(n, n, a.as_slice());
    let q = helmert_basis(n);
    let restricted = -0.5 * q.transpose() * am * &q;
    let sym = 0.5 * (&restricted + restricted.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Every nonempty subset of `0..n`.
pub fn all_subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << n)).map(move |mask| (0..n).filter(|&j| mask & (1 << j) != 0).collect())
}
