//! Privacy accounting and the Gaussian mechanism.
//!
//! [`accountant`] composes Renyi-DP curves of Gaussian mechanisms and
//! calibrates a shared noise multiplier for a target `(epsilon, delta)`.
//! [`mechanism`] applies that noise to mean embeddings and class counts with
//! their analytic sensitivities and builds the class-reweighted release.
//! [`bound`] evaluates the expected absolute error of the noisy
//! random-feature MMD^2 against the exact-kernel estimator.

pub mod accountant;
pub mod bound;
pub mod mechanism;

pub use accountant::{
    alpha_grid, calibrate_sigma, epsilon_for_sigma, rdp_gaussian, rdp_to_dp, Calibration, DpConversion, PrivacyAccountant, RdpCurve,
    ALPHA_GRID_LEN, SIGMA_MAX, SIGMA_MIN,
};
pub use bound::error_bound;
pub use mechanism::{
    embedding_sensitivity, label_distribution, privatize_counts, privatize_embedding, reweight_embedding,
    EmbeddingRelease, GaussianMechanismSpec, NoisyClassCounts, PrivacyBudget, COUNT_FLOOR, COUNT_SENSITIVITY,
};
