//! Inductive manifold hashing.
//!
//! A manifold embedding (t-SNE, Laplacian eigenmaps, PCA) is learned on a
//! small base set `B` of `m` points, typically K-means centers. Any other
//! point `x` is then placed in the embedding in closed form as the
//! affinity-weighted average of the embeddings of its `k` nearest base points,
//! and thresholded at zero to obtain an `r`-bit hash code:
//!
//! ```text
//! y(x) = sum_j w(x, c_j) y_j / sum_j w(x, c_j) - offset
//! h(x) = [y(x) >= 0]
//! w(x, c) = exp(-|x - c|^2 / sigma^2)   for c among the k nearest bases
//! ```
//!
//! The crate is organised along the training pipeline:
//!
//! - [`dataset`]: loaders (IDX, fvecs/bvecs, CSV, native container), synthetic
//!   data and train/test splits.
//! - [`affinity`]: truncated Gaussian weights between points and base points.
//! - [`base`]: base-set selection by K-means or random sampling.
//! - [`embed`]: base-set embeddings and the dense symmetric eigensolver.
//! - [`model`], [`codes`], [`prototype`]: the inductive extension, hashing,
//!   persistence and the sampled prototype estimator.
//! - [`search`]: Hamming ranking/lookup, ground truth, metrics and the LSH /
//!   PCAH baselines.
//! - [`pipeline`] and [`studies`]: end-to-end training and the experiment
//!   suites built on top of it.

pub mod affinity;
pub mod base;
mod binio;
pub mod codes;
pub mod dataset;
pub mod embed;
mod error;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod prototype;
pub mod search;
pub mod seed;
pub mod studies;

pub use codes::CodeSet;
pub use dataset::DataMatrix;
pub use error::{Error, Result};
pub use matrix::Matrix;
pub use model::HashModel;
