//! Multi-omics sample integration by fusing intra- and inter-dataset
//! affinity networks.
//!
//! The pipeline runs in three phases:
//!
//! 1. [`preprocess`]: sparse-feature filtering, KNN imputation, Z-scoring,
//!    power transformation and Bayesian-GMM feature selection.
//! 2. [`cca`] and [`affinity`]: canonical-variate distances for every directed
//!    pair of omics, plus Euclidean distances within each omics, all turned
//!    into local-scale affinity matrices.
//! 3. [`fusion`]: entropy-weighted fusion of the intra affinities, of the inter
//!    affinities, and finally of the two stage outputs.
//!
//! The fused network is then partitioned with [`clustering::kmeans_pp`] and
//! scored with ARI/NMI or a log-rank test ([`survival`]). [`synthgen`] produces
//! planted-cluster datasets for verification, and [`pipeline::run_pipeline`]
//! chains every phase end to end.

pub mod affinity;
pub mod cca;
pub mod clustering;
pub mod error;
pub mod fusion;
pub mod numkernel;
pub mod pipeline;
pub mod preprocess;
pub mod survival;
pub mod synthgen;

pub use error::{OmicsError, Result};
