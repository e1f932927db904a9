mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relational_kmeans::{
    centroid_coefficients, centroid_norm_sq, quadratic_form_distance, ClusterStatsCache,
    CoefficientVector, SquaredDissimilarityMatrix,
};

fn assert_cache_matches_rebuild(cache: &ClusterStatsCache, a: &SquaredDissimilarityMatrix) {
    let fresh = ClusterStatsCache::new(a, cache.labels(), cache.num_clusters()).unwrap();
    let tol = 1e-9 * a.n() as f64 * a.scale().max(1.0);
    assert_eq!(cache.sizes(), fresh.sizes());
    for c in 0..cache.num_clusters() {
        assert!((cache.within_sum(c) - fresh.within_sum(c)).abs() <= tol);
        for i in 0..a.n() {
            assert!((cache.point_cluster_sum(i, c) - fresh.point_cluster_sum(i, c)).abs() <= tol);
        }
    }
}

proptest! {
    #[test]
    fn cached_distance_equals_quadratic_form(seed: u64, n in 1usize..=32, k in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(n, &mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let cache = ClusterStatsCache::new(&a, &labels, k).unwrap();
        let tol = 1e-9 * a.scale().max(1.0);
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
            if members.is_empty() {
                continue;
            }
            for i in 0..n {
                let lambda = centroid_coefficients(i, &members, n).unwrap();
                let direct = quadratic_form_distance(&a, &lambda).unwrap();
                let brute = brute_centroid_distance(&a, i, &members);
                let cached = cache.centroid_distance(i, c).unwrap();
                prop_assert!((cached - direct).abs() <= tol, "{cached} vs {direct}");
                prop_assert!((brute - direct).abs() <= tol);
            }
        }
    }

    #[test]
    fn quadratic_form_matches_double_sum(seed: u64, n in 2usize..=32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(n, &mut rng);
        let lambda = random_zero_sum(n, &mut rng);
        let direct = quadratic_form_distance(&a, &CoefficientVector::new(lambda.clone()).unwrap()).unwrap();
        prop_assert!((direct - brute_quadratic_form(&a, &lambda)).abs() <= 1e-9 * a.scale());
    }

    #[test]
    fn euclidean_distances_are_nonnegative(seed: u64, n in 1usize..=24, d in 1usize..=6, k in 1usize..=5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = SquaredDissimilarityMatrix::from_points(&random_points(n, d, &mut rng)).unwrap();
        prop_assert!(!a.has_negative_entries());
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let cache = ClusterStatsCache::new(&a, &labels, k).unwrap();
        for c in (0..k).filter(|&c| cache.size(c) > 0) {
            for i in 0..n {
                prop_assert!(cache.centroid_distance(i, c).unwrap() >= -1e-9 * a.scale());
            }
            if cache.size(c) == 1 {
                prop_assert_eq!(cache.within_sum(c), 0.0);
            }
            prop_assert!(cache.within_sum(c) >= 0.0);
        }
    }

    #[test]
    fn moves_keep_cache_coherent(seed: u64, moves in proptest::collection::vec((0usize..20, 0usize..4), 1..80)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(20, &mut rng);
        let labels: Vec<usize> = (0..20).map(|_| rng.random_range(0..4)).collect();
        let mut cache = ClusterStatsCache::new(&a, &labels, 4).unwrap();
        for (i, to) in moves {
            cache.move_point(&a, i, to).unwrap();
        }
        assert_cache_matches_rebuild(&cache, &a);
    }

    #[test]
    fn validation_is_idempotent(seed: u64, n in 1usize..=12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(n, &mut rng);
        let rows: Vec<&[f64]> = a.rows().collect();
        prop_assert_eq!(SquaredDissimilarityMatrix::validate(&rows, None).unwrap(), a);
    }
}

#[test]
fn fifty_random_moves_on_twenty_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let a = random_matrix(20, &mut rng);
    let labels: Vec<usize> = (0..20).map(|i| i % 5).collect();
    let mut cache = ClusterStatsCache::new(&a, &labels, 5).unwrap();
    for _ in 0..50 {
        let i = rng.random_range(0..20);
        let to = rng.random_range(0..5);
        cache.move_point(&a, i, to).unwrap();
    }
    assert_cache_matches_rebuild(&cache, &a);
}

#[test]
fn objective_is_sum_of_own_distances() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let a = random_matrix(15, &mut rng);
    let labels: Vec<usize> = (0..15).map(|i| if i < 3 { i } else { rng.random_range(0..3) }).collect();
    let cache = ClusterStatsCache::new(&a, &labels, 3).unwrap();
    let per_point: f64 = (0..15)
        .map(|i| {
            let members: Vec<usize> = (0..15).filter(|&j| labels[j] == labels[i]).collect();
            brute_centroid_distance(&a, i, &members)
        })
        .sum();
    assert!((cache.total_objective() - per_point).abs() <= 1e-9 * 15.0 * a.scale());
}

#[test]
fn within_cluster_identity_over_every_subset() {
    let n = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let a = random_matrix(n, &mut rng);
    let tol = 1e-9 * n as f64 * a.scale();
    for subset in all_subsets(n) {
        let labels: Vec<usize> = (0..n).map(|j| usize::from(!subset.contains(&j))).collect();
        let cache = ClusterStatsCache::new(&a, &labels, 2).unwrap();
        let sum: f64 = subset.iter().map(|&i| brute_centroid_distance(&a, i, &subset)).sum();
        let identity = cache.within_sum(0) / (2.0 * subset.len() as f64);
        assert!((sum - identity).abs() <= tol, "{subset:?}: {sum} vs {identity}");
    }
}

#[test]
fn coefficient_norms_over_every_subset() {
    let n = 8;
    for subset in all_subsets(n) {
        for i in 0..n {
            let lambda = centroid_coefficients(i, &subset, n).unwrap();
            let expected = centroid_norm_sq(subset.len(), subset.contains(&i));
            assert!((lambda.norm_sq() - expected).abs() < 1e-14);
        }
    }
}
