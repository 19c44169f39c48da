//! Adapted empirical measures of discrete-time stochastic processes and exact
//! (adapted) Wasserstein distances between finitely supported path measures.
//!
//! The crate is organised bottom-up:
//!
//! - [`paths`]: dimensions, paths, samples and the norms used everywhere.
//! - [`rng`]: the seeded random stream every stochastic operation draws from.
//! - [`grid`]: uniform and dyadic-ring partitions of `R^{dT}` and the midpoint
//!   projections onto them.
//! - [`measure`]: discrete measures on `R^d` and path-measure trees built from
//!   samples, with or without grid projection.
//! - [`ot`]: exact discrete optimal transport (network simplex, 1-D sweep, and a
//!   dense simplex used for verification).
//! - [`nested`]: the adapted Wasserstein distance by backward recursion, the
//!   bicausal LP it is checked against, and the flat Wasserstein distance.
//! - [`models`]: samplers for the example processes and small exact trees.
//! - [`experiments`]: Monte Carlo harnesses for convergence and concentration.
//!
//! All reals are `f64`. Weights of discrete measures are integer counts over a
//! common denominator so that sums of conditional weights are exact.

pub mod error;
pub mod experiments;
pub mod grid;
pub mod measure;
pub mod models;
pub mod nested;
pub mod ot;
pub mod paths;
pub mod rng;

pub use error::{Error, Result};
pub use grid::{CellId, GridKind, GridSpec};
pub use measure::{DiscreteMeasure, ModelMetadata, PathMeasureTree};
pub use models::{ModelKind, ModelSpec};
pub use nested::{aw_nested, bicausal_lp_oracle, w_flat, ValueTable};
pub use ot::{w1_exact_1d, wp_discrete, wp_with_value_to_go, CostMatrix, Coupling};
pub use paths::{sum_norm, sup_coord, Dims, Path, PathSample};
