//! Center-outward and Monge–Kantorovich rank tests for the multivariate
//! two-sample location problem.
//!
//! The pipeline maps pooled observations onto a deterministic reference
//! grid by optimal assignment, applies a score function to the resulting
//! vector ranks and forms a quadratic statistic whose null distribution does
//! not depend on the data law. Critical values are therefore computed once
//! per grid by Monte-Carlo over random label assignments.

pub mod dataset;
pub mod engine;
pub mod error;
pub mod grids;
pub mod io;
pub mod ranks;
pub mod rng;
pub mod sim;
pub mod special;
pub mod transport;

#[doc(hidden)]
pub mod cli;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use grids::{build_grid, optimal_factorization, Factorization, Grid, ReferenceKind};
pub use ranks::{extract_rank_sign, grid_scores, score, scored_sample, RankSign, ScoreKind, ScoredSample};
pub use special::{chisq_cdf, inv_cdf_chisq, inv_cdf_normal, normal_cdf};
pub use transport::{cost_matrix, empirical_map, solve_assignment, Assignment, CostMatrix, EmpiricalMap};
