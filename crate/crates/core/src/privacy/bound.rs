//! Worst-case error bound on the squared random-feature MMD under noise.

use crate::error::{Error, Result};

/// Upper bound on the expected gap between the true squared MMD and the
/// squared distance to a noisy embedding, plus the random-feature
/// approximation term:
///
/// `4 D sigma^2 / m^2 + 8 sqrt(2) sigma / m * Gamma((D+1)/2) / Gamma(D/2) + 8 sqrt(2 pi / D)`
///
/// The first two terms come from the Gaussian noise, the last from the
/// finite number of features.
pub fn error_bound(num_features: usize, num_samples: usize, sigma: f64) -> Result<f64> {
    if num_features == 0 {
        return Err(Error::InvalidConfig("num_features must be positive".into()));
    }
    if num_samples == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidSigma(sigma));
    }
    let d = num_features as f64;
    let m = num_samples as f64;
    let gamma_ratio = (libm::lgamma((d + 1.0) / 2.0) - libm::lgamma(d / 2.0)).exp();
    let noise = 4.0 * d * sigma * sigma / (m * m) + 8.0 * std::f64::consts::SQRT_2 * sigma / m * gamma_ratio;
    let features = 8.0 * (2.0 * std::f64::consts::PI / d).sqrt();
    Ok(noise + features)
}
