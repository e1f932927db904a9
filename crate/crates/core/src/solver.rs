//! Batch Lloyd iteration over a dissimilarity matrix.
//!
//! Each iteration assigns every point to its nearest centroid (ties, up to a
//! relative `1e-12`, go to the lowest cluster id), applies all moves at once,
//! then refills any cluster left empty. Centroids are never materialized; distances come from
//! [`ClusterStatsCache`].
//!
//! [`vector_kmeans_reference`] runs the same loop on coordinates with
//! explicit means. Both share initialization, tie-breaking and stopping
//! rules, so on Euclidean input they produce the same labels step by step.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distance::{centroid_norm_sq, ClusterStatsCache};
use crate::error::{Error, Result};
use crate::matrix::{squared_euclidean, SquaredDissimilarityMatrix};
use crate::spectral::{
    apply_beta_spread, beta_star, lazy_beta_increment, shifted_distance, BetaIncrement, BetaMode,
    BetaState, DEFAULT_EIGEN_TOLERANCE,
};

/// Lazy mode ignores negative distances smaller than this fraction of the
/// matrix scale; they are roundoff, not geometry.
const LAZY_ROUNDOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// The first `k` points seed clusters `0..k`; the rest are labeled uniformly.
    RandomPartition,
    /// D²-weighted seeding on matrix entries, then nearest-seed assignment.
    #[default]
    PlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyClusterPolicy {
    /// Move the point farthest from its own centroid into the empty cluster.
    #[default]
    RepairFarthest,
    /// Fail with [`Error::EmptyCluster`].
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    pub num_clusters: usize,
    pub max_iterations: usize,
    /// Relative objective improvement below which a run is considered stalled.
    pub objective_tolerance: f64,
    pub seed: u64,
    pub init_method: InitMethod,
    pub beta_mode: BetaMode,
    pub restarts: usize,
    pub empty_cluster_policy: EmptyClusterPolicy,
    /// Relative tolerance for treating a restricted eigenvalue as zero.
    pub eigen_tolerance: f64,
    /// Slack added to every lazy increment.
    pub lazy_epsilon: f64,
    /// Keep the labeling after every iteration in [`RunReport::label_history`].
    pub record_history: bool,
}

impl SolverConfig {
    pub fn new(num_clusters: usize) -> Self {
        Self {
            num_clusters,
            max_iterations: 300,
            objective_tolerance: 1e-8,
            seed: 0,
            init_method: InitMethod::PlusPlus,
            beta_mode: BetaMode::Eager,
            restarts: 1,
            empty_cluster_policy: EmptyClusterPolicy::RepairFarthest,
            eigen_tolerance: DEFAULT_EIGEN_TOLERANCE,
            lazy_epsilon: 0.0,
            record_history: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.num_clusters == 0 {
            return Err(Error::InvalidConfig("number of clusters must be at least 1".into()));
        }
        if self.num_clusters > n {
            return Err(Error::TooManyClusters {
                clusters: self.num_clusters,
                points: n,
            });
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1".into()));
        }
        if !(self.objective_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("objective tolerance must be non-negative".into()));
        }
        if !(self.eigen_tolerance >= 0.0) {
            return Err(Error::InvalidConfig("eigen tolerance must be non-negative".into()));
        }
        if !(self.lazy_epsilon >= 0.0) {
            return Err(Error::InvalidConfig("lazy epsilon must be non-negative".into()));
        }
        Ok(())
    }
}

/// Outcome of [`solve`]: the best restart, plus a summary of all of them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub labels: Vec<usize>,
    pub final_objective: f64,
    /// Objective of the initial labeling followed by one entry per iteration.
    pub objective_trajectory: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub beta_final: f64,
    pub beta_increments: Vec<BetaIncrement>,
    pub restart_index_of_best: usize,
    pub restart_objectives: Vec<f64>,
    /// Initial labeling followed by the labeling after each iteration. Empty
    /// unless [`SolverConfig::record_history`] is set.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub label_history: Vec<Vec<usize>>,
}

/// Generator for restart `restart`: ChaCha8 seeded from `seed`, on stream
/// `restart`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Points `0..k` get labels `0..k`; every other point gets a uniform label.
pub fn init_random_partition<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Vec<usize>> {
    check_cluster_count(n, k)?;
    Ok((0..n)
        .map(|i| if i < k { i } else { rng.random_range(0..k) })
        .collect())
}

/// D²-weighted seeding using matrix entries as seed distances.
pub fn init_plusplus<R: Rng + ?Sized>(
    a: &SquaredDissimilarityMatrix,
    k: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    init_plusplus_by(a.n(), k, rng, |i, j| a.get(i, j))
}

/// D²-weighted seeding over an arbitrary squared distance.
///
/// The first seed is uniform. Each further seed is drawn with probability
/// proportional to `max(0, min_s dist(i, s))`; if every weight is zero the
/// draw is uniform over unchosen points. Points are then labeled by their
/// nearest seed.
pub fn init_plusplus_by<R, F>(n: usize, k: usize, rng: &mut R, dist: F) -> Result<Vec<usize>>
where
    R: Rng + ?Sized,
    F: Fn(usize, usize) -> f64,
{
    check_cluster_count(n, k)?;
    let first = rng.random_range(0..n);
    let mut seeds = vec![first];
    let mut chosen = vec![false; n];
    chosen[first] = true;
    let mut nearest: Vec<f64> = (0..n).map(|i| dist(i, first).max(0.0)).collect();

    while seeds.len() < k {
        let weights: Vec<f64> = nearest
            .iter()
            .zip(&chosen)
            .map(|(&d, &c)| if c { 0.0 } else { d })
            .collect();
        let total: f64 = weights.iter().sum();
        let next = if total > 0.0 && total.is_finite() {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in weights.iter().enumerate() {
                if w > 0.0 {
                    acc += w;
                    pick = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            let unchosen = chosen.iter().filter(|&&c| !c).count();
            let nth = rng.random_range(0..unchosen);
            chosen
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .nth(nth)
                .map(|(i, _)| i)
                .expect("nth < unchosen")
        };
        seeds.push(next);
        chosen[next] = true;
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(dist(i, next).max(0.0));
        }
    }
    Ok(labeling_from_seeds_by(n, &seeds, dist))
}

/// Labels each point with the index of its nearest seed in `seeds`; ties go
/// to the earlier seed and every seed keeps its own label.
pub fn labeling_from_seeds(a: &SquaredDissimilarityMatrix, seeds: &[usize]) -> Vec<usize> {
    labeling_from_seeds_by(a.n(), seeds, |i, j| a.get(i, j))
}

fn labeling_from_seeds_by<F: Fn(usize, usize) -> f64>(n: usize, seeds: &[usize], dist: F) -> Vec<usize> {
    let mut labels: Vec<usize> = (0..n)
        .map(|i| {
            let mut best = 0;
            let mut best_d = dist(i, seeds[0]);
            for (c, &s) in seeds.iter().enumerate().skip(1) {
                let d = dist(i, s);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect();
    for (c, &s) in seeds.iter().enumerate() {
        labels[s] = c;
    }
    labels
}

fn check_cluster_count(n: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("number of clusters must be at least 1".into()));
    }
    if k > n {
        return Err(Error::TooManyClusters {
            clusters: k,
            points: n,
        });
    }
    Ok(())
}

/// One batch Lloyd iteration. Returns the number of relabeled points and the
/// objective afterwards, measured on the matrix spread by the current `β`.
///
/// In lazy mode, if any point-to-centroid distance is negative the most
/// negative one is lifted to zero through [`lazy_beta_increment`], and this
/// repeats until none is negative, before any point moves.
pub fn lloyd_iterate(
    cache: &mut ClusterStatsCache,
    a: &SquaredDissimilarityMatrix,
    beta: &mut BetaState,
    config: &SolverConfig,
    iteration: usize,
) -> Result<(usize, f64)> {
    let n = cache.num_points();
    let k = cache.num_clusters();
    if let Some(c) = cache.sizes().iter().position(|&s| s == 0) {
        return Err(Error::EmptyCluster(c));
    }
    let lazy = beta.mode() == BetaMode::Lazy;
    let mut raw = vec![0.0; n * k];
    for i in 0..n {
        for c in 0..k {
            raw[i * k + c] = cache.distance_unchecked(i, c, cache.size(c));
        }
    }
    let norm_sq = |i: usize, c: usize| centroid_norm_sq(cache.size(c), cache.labels()[i] == c);

    if lazy {
        let floor = -LAZY_ROUNDOFF * a.scale();
        loop {
            let b = beta.beta();
            let mut worst: Option<(f64, usize, usize)> = None;
            for i in 0..n {
                for c in 0..k {
                    let d = shifted_distance(raw[i * k + c], b, norm_sq(i, c));
                    if d < floor && worst.is_none_or(|(w, _, _)| d < w) {
                        worst = Some((d, i, c));
                    }
                }
            }
            let Some((d, i, c)) = worst else { break };
            let delta = lazy_beta_increment(d, norm_sq(i, c), config.lazy_epsilon)?;
            beta.increase(iteration, delta)?;
        }
    }

    let b = if lazy { beta.beta() } else { 0.0 };
    let old_labels = cache.labels().to_vec();
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        targets.push(nearest((0..k).map(|c| {
            let d = raw[i * k + c];
            if lazy {
                shifted_distance(d, b, norm_sq(i, c))
            } else {
                d
            }
        })));
    }
    for (i, &to) in targets.iter().enumerate() {
        cache.move_point(a, i, to)?;
    }

    let empty: Vec<usize> = (0..k).filter(|&c| cache.size(c) == 0).collect();
    if !empty.is_empty() {
        if config.empty_cluster_policy == EmptyClusterPolicy::Error {
            return Err(Error::EmptyCluster(empty[0]));
        }
        let own: Vec<f64> = (0..n)
            .map(|i| {
                let c = cache.labels()[i];
                let d = cache.distance_unchecked(i, c, cache.size(c));
                if lazy {
                    shifted_distance(d, b, centroid_norm_sq(cache.size(c), true))
                } else {
                    d
                }
            })
            .collect();
        let mut used = vec![false; n];
        for c in empty {
            let i = farthest(&own, |i| !used[i] && cache.size(cache.labels()[i]) > 1)
                .ok_or(Error::EmptyCluster(c))?;
            used[i] = true;
            cache.move_point(a, i, c)?;
        }
    }

    let moved = cache
        .labels()
        .iter()
        .zip(&old_labels)
        .filter(|(a, b)| a != b)
        .count();
    Ok((moved, objective_with_spread(cache, b)))
}

/// Distances within this relative margin of each other are tied. Both
/// members of a two-point cluster, for instance, sit at exactly the same
/// distance from its centroid, and only roundoff separates them.
const TIE: f64 = 1e-12;

fn tied(x: f64, y: f64) -> bool {
    (x - y).abs() <= TIE * x.abs().max(y.abs())
}

/// Index of the smallest distance; the lowest index among ties.
fn nearest(distances: impl Iterator<Item = f64>) -> usize {
    let distances: Vec<f64> = distances.collect();
    let min = distances.iter().copied().fold(f64::INFINITY, f64::min);
    distances
        .iter()
        .position(|&d| d == min || tied(d, min))
        .unwrap_or(0)
}

/// Eligible index with the largest distance; the lowest index among ties.
fn farthest(distances: &[f64], eligible: impl Fn(usize) -> bool) -> Option<usize> {
    let max = (0..distances.len())
        .filter(|&i| eligible(i))
        .map(|i| distances[i])
        .fold(f64::NEG_INFINITY, f64::max);
    (0..distances.len()).find(|&i| eligible(i) && (distances[i] == max || tied(distances[i], max)))
}

/// Objective on `A + β(11ᵀ − I)` from a cache built on `A`: each nonempty
/// cluster `c` gains `β (|c| − 1) / 2`.
fn objective_with_spread(cache: &ClusterStatsCache, beta: f64) -> f64 {
    let base = cache.total_objective();
    if beta == 0.0 {
        return base;
    }
    let n = cache.num_points() as f64;
    base + 0.5 * beta * (n - cache.nonempty_clusters() as f64)
}

/// Runs every restart and returns the one with the lowest final objective
/// (earliest restart on ties, where objectives within `1e-12` relative tie).
pub fn solve(a: &SquaredDissimilarityMatrix, config: &SolverConfig) -> Result<RunReport> {
    config.validate(a.n())?;
    let (matrix, beta) = prepare(a, config)?;
    let mut best: Option<RunReport> = None;
    let mut objectives = Vec::with_capacity(config.restarts);
    for r in 0..config.restarts {
        let mut rng = restart_rng(config.seed, r);
        let labels = match config.init_method {
            InitMethod::RandomPartition => init_random_partition(a.n(), config.num_clusters, &mut rng)?,
            InitMethod::PlusPlus => init_plusplus(&matrix, config.num_clusters, &mut rng)?,
        };
        let mut report = run_single(&matrix, labels, config, beta.clone())?;
        report.restart_index_of_best = r;
        objectives.push(report.final_objective);
        if best
            .as_ref()
            .is_none_or(|b| improves(report.final_objective, b.final_objective))
        {
            best = Some(report);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restart_objectives = objectives;
    Ok(best)
}

/// A single run starting from the given labeling. Restarts and the
/// initialization method are ignored.
pub fn solve_from_labeling(
    a: &SquaredDissimilarityMatrix,
    initial: &[usize],
    config: &SolverConfig,
) -> Result<RunReport> {
    config.validate(a.n())?;
    if initial.len() != a.n() {
        return Err(Error::LengthMismatch {
            expected: a.n(),
            got: initial.len(),
        });
    }
    let (matrix, beta) = prepare(a, config)?;
    let mut report = run_single(&matrix, initial.to_vec(), config, beta)?;
    report.restart_objectives = vec![report.final_objective];
    Ok(report)
}

fn prepare<'a>(
    a: &'a SquaredDissimilarityMatrix,
    config: &SolverConfig,
) -> Result<(Cow<'a, SquaredDissimilarityMatrix>, BetaState)> {
    let mut state = BetaState::new(config.beta_mode);
    if config.beta_mode != BetaMode::Eager {
        return Ok((Cow::Borrowed(a), state));
    }
    let beta = beta_star(a, config.eigen_tolerance)?;
    if beta == 0.0 {
        return Ok((Cow::Borrowed(a), state));
    }
    state.increase(0, beta)?;
    Ok((Cow::Owned(apply_beta_spread(a, beta)?), state))
}

fn run_single(
    a: &SquaredDissimilarityMatrix,
    labels: Vec<usize>,
    config: &SolverConfig,
    mut beta: BetaState,
) -> Result<RunReport> {
    let k = config.num_clusters;
    let mut cache = ClusterStatsCache::new(a, &labels, k)?;
    if let Some(c) = cache.sizes().iter().position(|&s| s == 0) {
        match config.empty_cluster_policy {
            EmptyClusterPolicy::Error => return Err(Error::EmptyCluster(c)),
            EmptyClusterPolicy::RepairFarthest => {
                return Err(Error::InvalidConfig(format!(
                    "initial labeling leaves cluster {c} empty"
                )))
            }
        }
    }
    let lazy_b = |s: &BetaState| if s.mode() == BetaMode::Lazy { s.beta() } else { 0.0 };
    let mut trajectory = vec![objective_with_spread(&cache, lazy_b(&beta))];
    let mut history = Vec::new();
    if config.record_history {
        history.push(labels);
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let beta_before = beta.beta();
        let (moved, objective) = lloyd_iterate(&mut cache, a, &mut beta, config, iterations)?;
        let previous = *trajectory.last().expect("trajectory is never empty");
        trajectory.push(objective);
        if config.record_history {
            history.push(cache.labels().to_vec());
        }
        if moved == 0 {
            converged = true;
            break;
        }
        if beta.beta() == beta_before && stalled(previous, objective, config.objective_tolerance) {
            converged = true;
            break;
        }
    }
    Ok(RunReport {
        labels: cache.labels().to_vec(),
        final_objective: *trajectory.last().expect("trajectory is never empty"),
        objective_trajectory: trajectory,
        iterations,
        converged,
        beta_final: beta.beta(),
        beta_increments: beta.increments().to_vec(),
        restart_index_of_best: 0,
        restart_objectives: Vec::new(),
        label_history: history,
    })
}

/// Whether `candidate` beats `incumbent` by more than roundoff. Restarts that
/// reach the same partition differ only in the last bits.
fn improves(candidate: f64, incumbent: f64) -> bool {
    candidate < incumbent && !tied(candidate, incumbent)
}

fn stalled(previous: f64, current: f64, tolerance: f64) -> bool {
    let improvement = (previous - current) / previous.abs().max(f64::MIN_POSITIVE);
    improvement < tolerance
}

/// Classic k-means on coordinates with explicit centroid means.
///
/// Initialization streams, tie-breaking, empty-cluster repair and stopping
/// rules match [`solve`]. The spread mode is ignored: for points in a
/// Euclidean space no spread is ever needed.
pub fn vector_kmeans_reference<P: AsRef<[f64]>>(points: &[P], config: &SolverConfig) -> Result<RunReport> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let dim = points[0].as_ref().len();
    for (index, p) in points.iter().enumerate() {
        if p.as_ref().len() != dim {
            return Err(Error::DimensionMismatch {
                index,
                expected: dim,
                got: p.as_ref().len(),
            });
        }
    }
    config.validate(n)?;
    let dist = |i: usize, j: usize| squared_euclidean(points[i].as_ref(), points[j].as_ref());
    let mut best: Option<RunReport> = None;
    let mut objectives = Vec::with_capacity(config.restarts);
    for r in 0..config.restarts {
        let mut rng = restart_rng(config.seed, r);
        let labels = match config.init_method {
            InitMethod::RandomPartition => init_random_partition(n, config.num_clusters, &mut rng)?,
            InitMethod::PlusPlus => init_plusplus_by(n, config.num_clusters, &mut rng, dist)?,
        };
        let mut report = reference_single(points, labels, config)?;
        report.restart_index_of_best = r;
        objectives.push(report.final_objective);
        if best
            .as_ref()
            .is_none_or(|b| improves(report.final_objective, b.final_objective))
        {
            best = Some(report);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restart_objectives = objectives;
    Ok(best)
}

fn centroids<P: AsRef<[f64]>>(points: &[P], labels: &[usize], k: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let dim = points[0].as_ref().len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p.as_ref()) {
            *s += x;
        }
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            for x in s.iter_mut() {
                *x /= c as f64;
            }
        }
    }
    (sums, counts)
}

fn reference_objective<P: AsRef<[f64]>>(points: &[P], labels: &[usize], k: usize) -> f64 {
    let (z, _) = centroids(points, labels, k);
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| squared_euclidean(p.as_ref(), &z[l]))
        .sum()
}

fn reference_single<P: AsRef<[f64]>>(points: &[P], mut labels: Vec<usize>, config: &SolverConfig) -> Result<RunReport> {
    let n = points.len();
    let k = config.num_clusters;
    let mut trajectory = vec![reference_objective(points, &labels, k)];
    let mut history = Vec::new();
    if config.record_history {
        history.push(labels.clone());
    }
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        iterations += 1;
        let (z, _) = centroids(points, &labels, k);
        let old = labels.clone();
        for (i, p) in points.iter().enumerate() {
            labels[i] = nearest(z.iter().map(|zc| squared_euclidean(p.as_ref(), zc)));
        }
        let (z, mut counts) = centroids(points, &labels, k);
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        if !empty.is_empty() {
            if config.empty_cluster_policy == EmptyClusterPolicy::Error {
                return Err(Error::EmptyCluster(empty[0]));
            }
            let own: Vec<f64> = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| squared_euclidean(p.as_ref(), &z[l]))
                .collect();
            let mut used = vec![false; n];
            for c in empty {
                let i = farthest(&own, |i| !used[i] && counts[labels[i]] > 1)
                    .ok_or(Error::EmptyCluster(c))?;
                used[i] = true;
                counts[labels[i]] -= 1;
                counts[c] += 1;
                labels[i] = c;
            }
        }
        let moved = labels.iter().zip(&old).filter(|(a, b)| a != b).count();
        let objective = reference_objective(points, &labels, k);
        let previous = *trajectory.last().expect("trajectory is never empty");
        trajectory.push(objective);
        if config.record_history {
            history.push(labels.clone());
        }
        if moved == 0 || stalled(previous, objective, config.objective_tolerance) {
            converged = true;
            break;
        }
    }
    Ok(RunReport {
        final_objective: *trajectory.last().expect("trajectory is never empty"),
        labels,
        objective_trajectory: trajectory,
        iterations,
        converged,
        beta_final: 0.0,
        beta_increments: Vec::new(),
        restart_index_of_best: 0,
        restart_objectives: Vec::new(),
        label_history: history,
    })
}

/// Renames cluster ids in order of first appearance.
pub fn canonical_labels(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}
