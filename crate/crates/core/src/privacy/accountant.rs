//! Renyi-DP accounting for Gaussian mechanisms.
//!
//! A sensitivity-normalized Gaussian mechanism with noise multiplier `sigma`
//! is `(alpha, alpha / (2 sigma^2))`-RDP for every order `alpha > 1`. Curves
//! add under composition and are converted to `(epsilon, delta)` on a fixed
//! 60-point order grid with
//!
//! ```text
//! epsilon = min_alpha  eps_alpha + ln(1 - 1/alpha) - (ln delta + ln alpha) / (alpha - 1)
//! ```
//!
//! which is never looser than the classic `eps_alpha + ln(1/delta)/(alpha-1)`.

use crate::error::{Error, Result};
use crate::privacy::mechanism::PrivacyBudget;

pub const ALPHA_GRID_LEN: usize = 60;
pub const ALPHA_MIN: f64 = 1.05;
pub const ALPHA_MAX: f64 = 1024.0;

/// Search interval for [`calibrate_sigma`].
pub const SIGMA_MIN: f64 = 1e-2;
pub const SIGMA_MAX: f64 = 1e6;

/// Relative width at which the noise-multiplier bisection stops.
const SIGMA_REL_TOL: f64 = 1e-7;

/// The fixed order grid: 60 values log-spaced from 1.05 to 1024 inclusive.
pub fn alpha_grid() -> Vec<f64> {
    let ratio = ALPHA_MAX / ALPHA_MIN;
    (0..ALPHA_GRID_LEN)
        .map(|k| {
            if k == ALPHA_GRID_LEN - 1 {
                ALPHA_MAX
            } else {
                ALPHA_MIN * ratio.powf(k as f64 / (ALPHA_GRID_LEN - 1) as f64)
            }
        })
        .collect()
}

/// RDP of the Gaussian mechanism at order `alpha`: `alpha / (2 sigma^2)`.
pub fn rdp_gaussian(sigma: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidOrder(alpha));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidSigma(sigma));
    }
    Ok(alpha / (2.0 * sigma * sigma))
}

/// An RDP curve sampled on an order grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RdpCurve {
    alphas: Vec<f64>,
    epsilons: Vec<f64>,
}

impl RdpCurve {
    /// The zero curve (no mechanism applied) on `alphas`.
    pub fn zero(alphas: Vec<f64>) -> Self {
        let epsilons = vec![0.0; alphas.len()];
        Self { alphas, epsilons }
    }

    pub fn gaussian(sigma: f64, alphas: Vec<f64>) -> Result<Self> {
        let epsilons = alphas.iter().map(|&a| rdp_gaussian(sigma, a)).collect::<Result<Vec<_>>>()?;
        Ok(Self { alphas, epsilons })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    /// Pointwise sum, i.e. sequential composition.
    pub fn compose(&self, other: &RdpCurve) -> Result<RdpCurve> {
        if self.alphas != other.alphas {
            return Err(Error::ShapeMismatch("RDP curves on different order grids".into()));
        }
        let epsilons = self.epsilons.iter().zip(&other.epsilons).map(|(a, b)| a + b).collect();
        Ok(RdpCurve { alphas: self.alphas.clone(), epsilons })
    }
}

/// Result of an RDP to `(epsilon, delta)` conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpConversion {
    pub epsilon: f64,
    /// Order attaining the minimum.
    pub alpha: f64,
}

/// Converts a composed curve to the smallest `epsilon` over its grid.
pub fn rdp_to_dp(curve: &RdpCurve, delta: f64) -> Result<DpConversion> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    if curve.alphas.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let log_delta = delta.ln();
    let mut best = DpConversion { epsilon: f64::INFINITY, alpha: f64::NAN };
    for (&alpha, &rdp) in curve.alphas.iter().zip(&curve.epsilons) {
        if !(alpha > 1.0) {
            return Err(Error::InvalidOrder(alpha));
        }
        let eps = rdp + (-1.0 / alpha).ln_1p() - (log_delta + alpha.ln()) / (alpha - 1.0);
        if eps < best.epsilon {
            best = DpConversion { epsilon: eps, alpha };
        }
    }
    best.epsilon = best.epsilon.max(0.0);
    Ok(best)
}

/// Tracks the composition of Gaussian releases.
#[derive(Debug, Clone)]
pub struct PrivacyAccountant {
    curve: RdpCurve,
    releases: usize,
}

impl Default for PrivacyAccountant {
    fn default() -> Self {
        Self::new()
    }
}

impl PrivacyAccountant {
    pub fn new() -> Self {
        Self { curve: RdpCurve::zero(alpha_grid()), releases: 0 }
    }

    pub fn add_gaussian(&mut self, sigma: f64) -> Result<()> {
        let step = RdpCurve::gaussian(sigma, self.curve.alphas.clone())?;
        self.curve = self.curve.compose(&step)?;
        self.releases += 1;
        Ok(())
    }

    pub fn releases(&self) -> usize {
        self.releases
    }

    pub fn curve(&self) -> &RdpCurve {
        &self.curve
    }

    pub fn spent(&self, delta: f64) -> Result<DpConversion> {
        rdp_to_dp(&self.curve, delta)
    }
}

/// Epsilon of `releases` Gaussian mechanisms sharing noise multiplier `sigma`.
pub fn epsilon_for_sigma(sigma: f64, releases: u32, delta: f64) -> Result<DpConversion> {
    let mut acc = PrivacyAccountant::new();
    for _ in 0..releases {
        acc.add_gaussian(sigma)?;
    }
    acc.spent(delta)
}

/// A calibrated noise multiplier and what it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub sigma: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub budget: PrivacyBudget,
}

/// Smallest noise multiplier in `[SIGMA_MIN, SIGMA_MAX]` whose composed
/// `num_releases`-fold Gaussian curve converts to at most `budget.epsilon`.
pub fn calibrate_sigma(budget: &PrivacyBudget) -> Result<Calibration> {
    let releases = budget.num_releases;
    let eps_at = |s: f64| epsilon_for_sigma(s, releases, budget.delta);
    let at_cap = eps_at(SIGMA_MAX)?;
    if at_cap.epsilon > budget.epsilon {
        return Err(Error::Unsatisfiable { target: budget.epsilon, achieved: at_cap.epsilon, sigma_cap: SIGMA_MAX });
    }
    let at_floor = eps_at(SIGMA_MIN)?;
    if at_floor.epsilon <= budget.epsilon {
        return Ok(Calibration { sigma: SIGMA_MIN, epsilon: at_floor.epsilon, alpha: at_floor.alpha, budget: *budget });
    }
    // invariant: eps(lo) > target >= eps(hi)
    let (mut lo, mut hi) = (SIGMA_MIN, SIGMA_MAX);
    let mut best = at_cap;
    while hi / lo - 1.0 > SIGMA_REL_TOL {
        let mid = (lo * hi).sqrt();
        let conv = eps_at(mid)?;
        if conv.epsilon <= budget.epsilon {
            hi = mid;
            best = conv;
        } else {
            lo = mid;
        }
    }
    Ok(Calibration { sigma: hi, epsilon: best.epsilon, alpha: best.alpha, budget: *budget })
}
