//! Locally adaptive neighborhood selection for dimension estimation and
//! nonlinear dimensionality reduction.
//!
//! The crate centers on an intrinsic-dimension estimator that, as a
//! by-product, assigns every point the largest neighbor order over which the
//! local sampling density is statistically uniform. Feeding those per-point
//! neighborhood sizes (and the estimated dimension) into neighborhood-based
//! embedders removes their two main hyper-parameters. Adaptive variants of
//! locally linear embedding, spectral embedding, and UMAP are provided,
//! together with an out-of-sample projection rule, K-means, clustering
//! agreement metrics, and a cross-validation harness for end-to-end
//! evaluation.

pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod graph;
pub mod idestim;
pub mod linalg;
pub mod lle;
pub mod neighbors;
pub mod oos;
pub mod pipeline;
pub mod rng;
pub mod spectral;
pub mod umap;

pub use dataset::PointCloud;
pub use error::{Error, ErrorCategory, Result};
pub use idestim::{abide, AbideConfig, AbideResult};
pub use lle::Embedding;
