//! Relational k-means: Lloyd-style clustering when the only input is a
//! matrix of squared dissimilarities.
//!
//! The distance from a point to a cluster mean is a quadratic form in the
//! dissimilarity matrix, so centroids never need coordinates. The same
//! formula is applied to matrices that do not come from any Euclidean
//! embedding; there it can produce negative distances, which
//! [`spectral`] detects and removes by spreading all off-diagonal entries by
//! a common amount.
//!
//! ```
//! use relational_kmeans::{solve, SolverConfig, SquaredDissimilarityMatrix};
//!
//! let points = [[0.0], [1.0], [10.0], [11.0]];
//! let a = SquaredDissimilarityMatrix::from_points(&points)?;
//! let mut config = SolverConfig::new(2);
//! config.restarts = 5;
//! let report = solve(&a, &config)?;
//! assert_eq!(report.final_objective, 1.0);
//! # Ok::<(), relational_kmeans::Error>(())
//! ```

pub mod distance;
pub mod error;
pub mod io;
pub mod matrix;
pub mod solver;
pub mod spectral;

pub use distance::{
    centroid_coefficients, centroid_norm_sq, quadratic_form_distance, ClusterStatsCache,
    CoefficientVector,
};
pub use error::{Error, Result};
pub use matrix::SquaredDissimilarityMatrix;
pub use solver::{
    canonical_labels, init_plusplus, init_random_partition, labeling_from_seeds, lloyd_iterate,
    restart_rng, solve, solve_from_labeling, vector_kmeans_reference, EmptyClusterPolicy,
    InitMethod, RunReport, SolverConfig,
};
pub use spectral::{
    apply_beta_spread, beta_star, gower_center, lazy_beta_increment, min_restricted_eigenvalue,
    shifted_distance, BetaIncrement, BetaMode, BetaState, CenteredGram,
};

// Code blocks in the guide under book/ are compiled and run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/quadratic-form.md")]
    mod quadratic_form {}
    #[doc = include_str!("../../../book/src/cluster-cache.md")]
    mod cluster_cache {}
    #[doc = include_str!("../../../book/src/non-euclidean.md")]
    mod non_euclidean {}
    #[doc = include_str!("../../../book/src/solver.md")]
    mod solver {}
    #[doc = include_str!("../../../book/src/files-and-cli.md")]
    mod files_and_cli {}
}
