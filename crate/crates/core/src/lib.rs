//! Differentially private synthetic data generation with random-feature
//! mean embeddings.
//!
//! The sensitive dataset is touched exactly once: its random Fourier
//! feature mean embedding (and, for imbalanced data, its class counts) is
//! released through the Gaussian mechanism. A conditional generator is then
//! fit to the released embedding by minimizing the random-feature MMD, and
//! synthetic records are drawn from it. Everything after the release is
//! post-processing and carries the same `(epsilon, delta)` guarantee.
//!
//! Modules:
//!
//! - [`featuremap`]: random Fourier features for the Gaussian kernel.
//! - [`embedding`]: mean embeddings and MMD estimators.
//! - [`privacy`]: Renyi accountant, Gaussian mechanism, error bound.
//! - [`generator`]: conditional MLP generator, loss gradient, Adam training.
//! - [`data`]: Gaussian-grid benchmark and tabular CSV ingestion.
//! - [`eval`]: downstream classifiers and mixture metrics.
//! - [`cli`]: command-line pipeline.

pub mod cli;
pub mod data;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod featuremap;
pub mod generator;
pub mod privacy;
pub mod rng;

pub use error::{Error, Result};
