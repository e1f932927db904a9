//! Centroid distances computed from the dissimilarity matrix alone.
//!
//! For a coefficient vector `λ` whose entries sum to zero, the squared
//! length of `Σ λ_j p_j` equals `−½ λᵀAλ`. The difference between a point
//! and a cluster mean is such a combination, so the point-to-centroid
//! distance needs nothing but `A`. When `A` is not Euclidean the same
//! expression still defines a distance, though it can be negative.
//!
//! [`quadratic_form_distance`] evaluates the form directly in `O(n²)`.
//! [`ClusterStatsCache`] keeps per-cluster sums so that the same value costs
//! `O(1)` per query and `O(n)` per point move.

use crate::error::{Error, Result};
use crate::matrix::SquaredDissimilarityMatrix;

/// Real coefficients summing to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    coeffs: Vec<f64>,
}

impl CoefficientVector {
    /// Accepts `coeffs` if `|Σ c| ≤ 1e-12 · Σ |c|`.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let sum: f64 = coeffs.iter().sum();
        let abs: f64 = coeffs.iter().map(|c| c.abs()).sum();
        if !sum.is_finite() || sum.abs() > 1e-12 * abs {
            return Err(Error::NonZeroSum { sum });
        }
        Ok(Self { coeffs })
    }

    /// `e_j − e_i` in dimension `n`.
    pub fn difference(i: usize, j: usize, n: usize) -> Result<Self> {
        for index in [i, j] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, len: n });
            }
        }
        let mut coeffs = vec![0.0; n];
        coeffs[j] += 1.0;
        coeffs[i] -= 1.0;
        Ok(Self { coeffs })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }
}

/// `−½ λᵀAλ`.
pub fn quadratic_form_distance(
    a: &SquaredDissimilarityMatrix,
    lambda: &CoefficientVector,
) -> Result<f64> {
    if lambda.len() != a.n() {
        return Err(Error::LengthMismatch {
            expected: a.n(),
            got: lambda.len(),
        });
    }
    let l = lambda.as_slice();
    let mut total = 0.0;
    for (row, &li) in a.rows().zip(l) {
        if li == 0.0 {
            continue;
        }
        let inner: f64 = row.iter().zip(l).map(|(aij, lj)| aij * lj).sum();
        total += li * inner;
    }
    Ok(-0.5 * total)
}

/// Coefficients of `z_S − p_i`: `1/|S|` on every member of `S`, minus one at `i`.
///
/// Duplicate members of `members` are counted once.
pub fn centroid_coefficients(i: usize, members: &[usize], n: usize) -> Result<CoefficientVector> {
    if i >= n {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    let mut in_set = vec![false; n];
    for &j in members {
        if j >= n {
            return Err(Error::IndexOutOfRange { index: j, len: n });
        }
        in_set[j] = true;
    }
    let size = in_set.iter().filter(|&&b| b).count();
    if size == 0 {
        return Err(Error::EmptyCluster(0));
    }
    let w = 1.0 / size as f64;
    let mut coeffs: Vec<f64> = in_set.iter().map(|&b| if b { w } else { 0.0 }).collect();
    coeffs[i] -= 1.0;
    Ok(CoefficientVector { coeffs })
}

/// `‖λ‖²` of [`centroid_coefficients`] for a cluster of `size` points:
/// `1 − 1/size` when the point belongs to it, `1 + 1/size` otherwise.
pub fn centroid_norm_sq(size: usize, is_member: bool) -> f64 {
    let inv = 1.0 / size as f64;
    if is_member {
        1.0 - inv
    } else {
        1.0 + inv
    }
}

/// Per-cluster sums over a fixed dissimilarity matrix.
///
/// For a labeling with `k` clusters this stores
///
/// * `sizes[c]`, the member count,
/// * `point_cluster_sums[i][c] = Σ_{j∈c} A_ij`,
/// * `within_sums[c] = Σ_{j∈c} Σ_{l∈c} A_jl`,
///
/// from which `d²(i, c) = P[i][c] / |c| − W_c / (2|c|²)`. The cache does not
/// borrow the matrix; methods that need entries take it as an argument and
/// must be given the same matrix every time.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterStatsCache {
    labels: Vec<usize>,
    num_clusters: usize,
    sizes: Vec<usize>,
    point_cluster_sums: Vec<f64>,
    within_sums: Vec<f64>,
}

impl ClusterStatsCache {
    /// Builds the cache from scratch in `O(n²)`.
    pub fn new(a: &SquaredDissimilarityMatrix, labels: &[usize], num_clusters: usize) -> Result<Self> {
        let n = a.n();
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_clusters) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                len: num_clusters,
            });
        }
        let k = num_clusters;
        let mut sizes = vec![0; k];
        for &l in labels {
            sizes[l] += 1;
        }
        let mut point_cluster_sums = vec![0.0; n * k];
        for (i, row) in a.rows().enumerate() {
            let sums = &mut point_cluster_sums[i * k..(i + 1) * k];
            for (aij, &lj) in row.iter().zip(labels) {
                sums[lj] += aij;
            }
        }
        let mut members: Vec<Vec<f64>> = vec![Vec::new(); k];
        for (j, &lj) in labels.iter().enumerate() {
            members[lj].push(point_cluster_sums[j * k + lj]);
        }
        let within_sums = members.iter().map(|m| pairwise_sum(m)).collect();
        Ok(Self {
            labels: labels.to_vec(),
            num_clusters: k,
            sizes,
            point_cluster_sums,
            within_sums,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_points(&self) -> usize {
        self.labels.len()
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, c: usize) -> usize {
        self.sizes[c]
    }

    pub fn point_cluster_sum(&self, i: usize, c: usize) -> f64 {
        self.point_cluster_sums[i * self.num_clusters + c]
    }

    pub fn within_sum(&self, c: usize) -> f64 {
        self.within_sums[c]
    }

    /// Generalized squared distance from point `i` to the mean of cluster `c`.
    pub fn centroid_distance(&self, i: usize, c: usize) -> Result<f64> {
        if i >= self.labels.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: self.labels.len(),
            });
        }
        if c >= self.num_clusters {
            return Err(Error::IndexOutOfRange {
                index: c,
                len: self.num_clusters,
            });
        }
        let size = self.sizes[c];
        if size == 0 {
            return Err(Error::EmptyCluster(c));
        }
        Ok(self.distance_unchecked(i, c, size))
    }

    #[inline]
    pub(crate) fn distance_unchecked(&self, i: usize, c: usize, size: usize) -> f64 {
        let s = size as f64;
        self.point_cluster_sum(i, c) / s - self.within_sums[c] / (2.0 * s * s)
    }

    /// Relabels point `i` as `to`, updating the two affected clusters in `O(n)`.
    pub fn move_point(&mut self, a: &SquaredDissimilarityMatrix, i: usize, to: usize) -> Result<()> {
        let n = self.labels.len();
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, len: n });
        }
        if to >= self.num_clusters {
            return Err(Error::IndexOutOfRange {
                index: to,
                len: self.num_clusters,
            });
        }
        let from = self.labels[i];
        if from == to {
            return Ok(());
        }
        let k = self.num_clusters;
        let a_ii = a.get(i, i);
        // P[i][from] still counts A_ii, P[i][to] does not yet.
        self.within_sums[from] -= 2.0 * self.point_cluster_sums[i * k + from] - a_ii;
        self.within_sums[to] += 2.0 * self.point_cluster_sums[i * k + to] + a_ii;
        for (sums, &a_ji) in self.point_cluster_sums.chunks_exact_mut(k).zip(a.row(i)) {
            sums[from] -= a_ji;
            sums[to] += a_ji;
        }
        self.sizes[from] -= 1;
        self.sizes[to] += 1;
        self.labels[i] = to;
        if self.sizes[from] == 0 {
            self.within_sums[from] = 0.0;
            for sums in self.point_cluster_sums.chunks_exact_mut(k) {
                sums[from] = 0.0;
            }
        }
        Ok(())
    }

    /// `Σ_c W_c / (2|c|)` over nonempty clusters, which equals the sum of
    /// every point's distance to its own centroid.
    pub fn total_objective(&self) -> f64 {
        self.sizes
            .iter()
            .zip(&self.within_sums)
            .filter(|(&s, _)| s > 0)
            .map(|(&s, &w)| w / (2.0 * s as f64))
            .sum()
    }

    /// Number of clusters with at least one member.
    pub fn nonempty_clusters(&self) -> usize {
        self.sizes.iter().filter(|&&s| s > 0).count()
    }
}

/// Recursive pairwise summation; error grows as `O(log n)` rather than `O(n)`.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let (lo, hi) = values.split_at(values.len() / 2);
    pairwise_sum(lo) + pairwise_sum(hi)
}
