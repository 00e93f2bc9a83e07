//! Sparse convex clustering: clusters observations by fusing rows of a center
//! matrix while a group-lasso penalty on its columns removes uninformative
//! features.
//!
//! Two solvers are provided, S-AMA ([`Algorithm::Sama`]) and S-ADMM
//! ([`Algorithm::Sadmm`]), together with k-NN Gaussian fusion weights,
//! adaptive feature factors, stability and validation tuning, degrees of
//! freedom estimators, simulation settings and baselines.
//!
//! ```
//! use scc_core::{center_features, solve, Algorithm, ColMatrix, FusionGraph, NormKind, PenaltyConfig,
//!                SolverOptions, WarmStart};
//!
//! let raw = ColMatrix::from_rows(&[[0.0, 1.0], [0.1, 1.1], [3.0, -1.0], [3.1, -0.9]]).unwrap();
//! let x = center_features(&raw).unwrap();
//! let graph = FusionGraph::complete(4, 1.0).unwrap();
//! let cfg = PenaltyConfig::with_unit_factors(0.05, 0.0, NormKind::L2, 0.25, 2).unwrap();
//! let fit = solve(Algorithm::Sama, &x, &graph, &cfg, &SolverOptions::default(), &WarmStart::cold()).unwrap();
//! assert!(fit.diagnostics.converged);
//! ```

// comparisons are negated on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admm;
pub mod ama;
pub mod baselines;
pub mod benchmark;
pub mod cluster;
pub mod dof;
pub mod error;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod prox;
pub mod scalar;
pub mod select;
pub mod simulate;
pub mod solver;
pub mod weights;

pub use cluster::{
    cluster_means, clustering_path, extract_clusters, fusing_gamma1, nearest_center_labels, partition_rows,
    selected_features, UnionFind, DEFAULT_MERGE_TOL,
};
pub use baselines::{convex_clustering, kmeans, KMeansFit};
pub use benchmark::{run_benchmark, BenchmarkConfig, Method, MethodSummary, RepOutcome};
pub use dof::{df_q1, df_q2, DegreesOfFreedom};
pub use error::{Result, SccError};
pub use matrix::ColMatrix;
pub use metrics::{fnr_fpr, rand_index};
pub use model::{
    center_features, objective_raw, objective_value, CenterEstimate, ClusteringResult, DataMatrix, Diagnostics,
    DualState, Edge, FusionGraph, PenaltyConfig,
};
pub use prox::{project_ball, prox, NormKind};
pub use scalar::Scalar;
pub use select::{
    default_grids, stability_score, tune_stability, tune_validation_rand, FitRecipe, GridSpec, StabilityConfig,
    StabilityTuning, ValidationTuning,
};
pub use simulate::{generate_half_moons, generate_spherical, SimData, SimSpec};
pub use solver::{solve, solve_raw, Algorithm, FitOutput, SolverOptions, WarmStart};
pub use weights::{adaptive_feature_factors, build_fusion_weights, rescale_fusion_weights, WeightConfig};

pub type ColMatrix64 = ColMatrix<f64>;
pub type ColMatrix32 = ColMatrix<f32>;
pub type DataMatrix64 = DataMatrix<f64>;
pub type DataMatrix32 = DataMatrix<f32>;
pub type CenterEstimate64 = CenterEstimate<f64>;
pub type CenterEstimate32 = CenterEstimate<f32>;
pub type FusionGraph64 = FusionGraph<f64>;
pub type FusionGraph32 = FusionGraph<f32>;
pub type PenaltyConfig64 = PenaltyConfig<f64>;
pub type PenaltyConfig32 = PenaltyConfig<f32>;
pub type FitOutput64 = FitOutput<f64>;
pub type FitOutput32 = FitOutput<f32>;
pub type ClusteringResult64 = ClusteringResult<f64>;
pub type ClusteringResult32 = ClusteringResult<f32>;
