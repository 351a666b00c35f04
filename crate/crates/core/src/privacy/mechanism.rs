//! Gaussian mechanism releases of mean embeddings and class counts.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::embedding::{EmbeddingKind, MeanEmbedding};
use crate::error::{Error, Result};
use crate::rng;

/// Noisy class counts are clamped from below at this value before they are
/// used as divisors or sampling weights.
pub const COUNT_FLOOR: f64 = 1.0;

/// Replace-one L2 sensitivity of a class-count vector: at most two entries
/// change, each by one.
pub const COUNT_SENSITIVITY: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    pub delta: f64,
    /// Number of Gaussian releases sharing the budget (1 or 2).
    pub num_releases: u32,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, delta: f64, num_releases: u32) -> Result<Self> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!("epsilon must be positive and finite, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(1..=2).contains(&num_releases) {
            return Err(Error::InvalidConfig(format!("num_releases must be 1 or 2, got {num_releases}")));
        }
        Ok(Self { epsilon, delta, num_releases })
    }

    /// `delta <= 1/m` is the usual recommendation; returns a warning if it
    /// does not hold.
    pub fn delta_warning(&self, num_samples: usize) -> Option<String> {
        let limit = 1.0 / num_samples as f64;
        (self.delta > limit).then(|| format!("delta {} exceeds 1/m = {limit:e}", self.delta))
    }
}

/// Sensitivity and noise multiplier; the additive noise std is their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMechanismSpec {
    pub sensitivity: f64,
    pub sigma: f64,
}

impl GaussianMechanismSpec {
    pub fn noise_std(&self) -> f64 {
        self.sensitivity * self.sigma
    }
}

/// Replace-one sensitivity of a mean embedding over `m` records:
/// `2/m` for unlabeled and labeled kinds, `2 sqrt(2)/m` for hetero-labeled.
pub fn embedding_sensitivity(kind: EmbeddingKind, num_samples: usize) -> f64 {
    2.0 * kind.norm_bound() / num_samples as f64
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSigma(sigma))
    }
}

/// A privatized mean embedding. Values cannot be modified once released;
/// only [`reweight_embedding`] derives a new release from an existing one.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRelease {
    values: Array2<f64>,
    kind: EmbeddingKind,
    num_samples: usize,
    spec: GaussianMechanismSpec,
    budget: Option<PrivacyBudget>,
    weighted: bool,
    noise_seed: u64,
}

impl EmbeddingRelease {
    pub(crate) fn from_parts(
        values: Array2<f64>,
        kind: EmbeddingKind,
        num_samples: usize,
        spec: GaussianMechanismSpec,
        budget: Option<PrivacyBudget>,
        weighted: bool,
        noise_seed: u64,
    ) -> Self {
        Self { values, kind, num_samples, spec, budget, weighted, noise_seed }
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn spec(&self) -> GaussianMechanismSpec {
        self.spec
    }

    pub fn budget(&self) -> Option<PrivacyBudget> {
        self.budget
    }

    pub fn weighted(&self) -> bool {
        self.weighted
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// Records the composed budget this release belongs to.
    pub fn with_budget(mut self, budget: PrivacyBudget) -> Self {
        self.budget = Some(budget);
        self
    }
}

/// Adds `Normal(0, (Delta sigma)^2)` to every entry of the embedding.
pub fn privatize_embedding(emb: &MeanEmbedding, sigma: f64, seed: u64) -> Result<EmbeddingRelease> {
    check_sigma(sigma)?;
    if emb.num_samples == 0 {
        return Err(Error::EmptyDataset);
    }
    let spec = GaussianMechanismSpec { sensitivity: embedding_sensitivity(emb.kind, emb.num_samples), sigma };
    let std = spec.noise_std();
    let mut rng = rng::seeded(seed, rng::stream::EMBEDDING_NOISE);
    let mut values = emb.values.as_standard_layout().into_owned();
    for v in values.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *v += std * n;
    }
    Ok(EmbeddingRelease::from_parts(values, emb.kind, emb.num_samples, spec, None, false, seed))
}

/// Privatized class counts.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyClassCounts {
    values: Vec<f64>,
    raw_total_m: usize,
    spec: GaussianMechanismSpec,
    noise_seed: u64,
}

impl NoisyClassCounts {
    pub(crate) fn from_parts(values: Vec<f64>, raw_total_m: usize, spec: GaussianMechanismSpec, noise_seed: u64) -> Self {
        Self { values, raw_total_m, spec, noise_seed }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn raw_total_m(&self) -> usize {
        self.raw_total_m
    }

    pub fn spec(&self) -> GaussianMechanismSpec {
        self.spec
    }

    pub fn noise_seed(&self) -> u64 {
        self.noise_seed
    }

    /// Counts clamped from below at [`COUNT_FLOOR`].
    pub fn clamped(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v.max(COUNT_FLOOR)).collect()
    }
}

/// Adds `Normal(0, 2 sigma^2)` to each class count.
pub fn privatize_counts(counts: &[usize], sigma: f64, seed: u64) -> Result<NoisyClassCounts> {
    check_sigma(sigma)?;
    if counts.is_empty() {
        return Err(Error::InvalidConfig("class count vector is empty".into()));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let spec = GaussianMechanismSpec { sensitivity: COUNT_SENSITIVITY, sigma };
    let std = spec.noise_std();
    let mut rng = rng::seeded(seed, rng::stream::COUNT_NOISE);
    let values = counts
        .iter()
        .map(|&c| {
            let n: f64 = rng.sample(StandardNormal);
            c as f64 + std * n
        })
        .collect();
    Ok(NoisyClassCounts::from_parts(values, total, spec, seed))
}

/// Scales column `c` of a labeled release by `m / max(noisy_m_c, 1)`, turning
/// each column into an estimate of its class-conditional mean embedding.
pub fn reweight_embedding(release: &EmbeddingRelease, counts: &NoisyClassCounts) -> Result<EmbeddingRelease> {
    if release.kind == EmbeddingKind::Unlabeled {
        return Err(Error::ShapeMismatch("reweighting needs a labeled release".into()));
    }
    if counts.values.len() != release.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "{} noisy counts for {} embedding columns",
            counts.values.len(),
            release.num_classes()
        )));
    }
    let m = counts.raw_total_m as f64;
    let mut values = release.values.clone();
    for (c, noisy) in counts.clamped().into_iter().enumerate() {
        let scale = m / noisy;
        values.column_mut(c).mapv_inplace(|v| v * scale);
    }
    Ok(EmbeddingRelease { values, weighted: true, ..release.clone() })
}

/// Label sampling distribution proportional to clamped noisy counts.
pub fn label_distribution(counts: &NoisyClassCounts) -> Vec<f64> {
    let clamped = counts.clamped();
    let total: f64 = clamped.iter().sum();
    clamped.into_iter().map(|c| c / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{labeled_mean_embedding, mean_embedding, LabeledPoint};
    use crate::featuremap::FeatureMap;
    use approx::assert_abs_diff_eq;

    fn toy_embedding(kind: EmbeddingKind, m: usize, classes: usize) -> MeanEmbedding {
        let values = Array2::from_shape_fn((40, classes), |(i, j)| ((i * 7 + j * 3) % 11) as f64 / 100.0);
        MeanEmbedding { values, num_samples: m, kind }
    }

    fn empirical_std(samples: &[f64]) -> f64 {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        (samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    }

    #[test]
    fn budget_validation_names_fields() {
        assert!(PrivacyBudget::new(1.0, 1e-5, 1).is_ok());
        let err = PrivacyBudget::new(1.0, 1.0, 1).unwrap_err().to_string();
        assert!(err.contains("delta"), "{err}");
        let err = PrivacyBudget::new(0.0, 1e-5, 1).unwrap_err().to_string();
        assert!(err.contains("epsilon"), "{err}");
        assert!(PrivacyBudget::new(1.0, 1e-5, 3).is_err());
        let b = PrivacyBudget::new(1.0, 0.1, 1).unwrap();
        assert!(b.delta_warning(100).is_some());
        assert!(b.delta_warning(5).is_none());
    }

    #[test]
    fn sensitivities() {
        assert_abs_diff_eq!(embedding_sensitivity(EmbeddingKind::Unlabeled, 100), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(embedding_sensitivity(EmbeddingKind::Labeled, 100), 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(
            embedding_sensitivity(EmbeddingKind::HeteroLabeled, 100),
            0.028284271247461905,
            epsilon = 1e-15
        );
        assert_eq!(COUNT_SENSITIVITY, 2f64.sqrt());
    }

    #[test]
    fn vanishing_noise_keeps_values() {
        let emb = toy_embedding(EmbeddingKind::Labeled, 10, 3);
        let rel = privatize_embedding(&emb, 1e-12, 5).unwrap();
        for (a, b) in rel.values().iter().zip(emb.values.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let counts = privatize_counts(&[3, 4, 5], 1e-12, 5).unwrap();
        for (a, b) in counts.values().iter().zip([3.0, 4.0, 5.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn invalid_sigma_rejected() {
        let emb = toy_embedding(EmbeddingKind::Unlabeled, 10, 1);
        assert!(matches!(privatize_embedding(&emb, 0.0, 1), Err(Error::InvalidSigma(_))));
        assert!(matches!(privatize_counts(&[1, 2], -1.0, 1), Err(Error::InvalidSigma(_))));
    }

    #[test]
    fn hetero_noise_std_matches() {
        // 100 draws x 1000 entries = 1e5 noise samples
        let emb = MeanEmbedding { values: Array2::zeros((1000, 1)), num_samples: 100, kind: EmbeddingKind::HeteroLabeled };
        let sigma = 1.7;
        let mut noise = Vec::with_capacity(100_000);
        for seed in 0..100 {
            let rel = privatize_embedding(&emb, sigma, seed).unwrap();
            assert_abs_diff_eq!(rel.spec().sensitivity, 2.0 * 2f64.sqrt() / 100.0, epsilon = 1e-15);
            noise.extend(rel.values().iter().copied());
        }
        let target = 2.0 * 2f64.sqrt() / 100.0 * sigma;
        assert!((empirical_std(&noise) / target - 1.0).abs() < 0.02);
    }

    #[test]
    fn count_noise_std_matches_and_ignores_class_count() {
        let sigma = 3.0;
        let mut noise = Vec::with_capacity(100_000);
        for seed in 0..20_000 {
            let c = privatize_counts(&[10, 20, 30, 40, 50], sigma, seed).unwrap();
            assert_eq!(c.spec().sensitivity, 2f64.sqrt());
            noise.extend(c.values().iter().zip([10.0, 20.0, 30.0, 40.0, 50.0]).map(|(v, c)| v - c));
        }
        assert!((empirical_std(&noise) / (2f64.sqrt() * sigma) - 1.0).abs() < 0.02);
        let two = privatize_counts(&[1, 1], sigma, 0).unwrap();
        assert_eq!(two.spec().sensitivity, COUNT_SENSITIVITY);
    }

    #[test]
    fn balanced_reweighting_scales_by_class_count() {
        let map = FeatureMap::sample(2, 8, 1.0, 2).unwrap();
        let pts: Vec<_> = (0..12).map(|i| LabeledPoint::new(vec![i as f64 * 0.1, 0.0], vec![], i % 3)).collect();
        let emb = labeled_mean_embedding(&pts, &map, 3).unwrap();
        let rel = privatize_embedding(&emb, 1e-12, 1).unwrap();
        let counts = privatize_counts(&[4, 4, 4], 1e-12, 1).unwrap();
        let w = reweight_embedding(&rel, &counts).unwrap();
        assert!(w.weighted());
        for (a, b) in w.values().iter().zip(rel.values().iter()) {
            assert_abs_diff_eq!(*a, 3.0 * b, epsilon = 1e-9);
        }
    }

    #[test]
    fn negative_noisy_count_is_clamped() {
        let emb = toy_embedding(EmbeddingKind::Labeled, 50, 2);
        let rel = privatize_embedding(&emb, 1e-12, 1).unwrap();
        let spec = GaussianMechanismSpec { sensitivity: COUNT_SENSITIVITY, sigma: 1.0 };
        let counts = NoisyClassCounts::from_parts(vec![53.0, -3.0], 50, spec, 0);
        let w = reweight_embedding(&rel, &counts).unwrap();
        for i in 0..40 {
            assert_abs_diff_eq!(w.values()[[i, 1]], 50.0 * rel.values()[[i, 1]], epsilon = 1e-12);
            assert!(w.values()[[i, 1]].signum() == rel.values()[[i, 1]].signum() || rel.values()[[i, 1]] == 0.0);
            assert!(w.values()[[i, 1]].is_finite());
        }
        let dist = label_distribution(&counts);
        assert_abs_diff_eq!(dist[0], 53.0 / 54.0, epsilon = 1e-15);
        assert_abs_diff_eq!(dist[1], 1.0 / 54.0, epsilon = 1e-15);
    }

    #[test]
    fn single_class_reweight_near_one() {
        let emb = toy_embedding(EmbeddingKind::Labeled, 1000, 1);
        let rel = privatize_embedding(&emb, 1e-6, 1).unwrap();
        let counts = privatize_counts(&[1000], 1e-6, 1).unwrap();
        let w = reweight_embedding(&rel, &counts).unwrap();
        for (a, b) in w.values().iter().zip(rel.values().iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
        }
    }

    #[test]
    fn reweight_shape_errors() {
        let map = FeatureMap::sample(1, 4, 1.0, 2).unwrap();
        let un = mean_embedding(&[vec![0.0]], &map).unwrap();
        let rel = privatize_embedding(&un, 1.0, 0).unwrap();
        let counts = privatize_counts(&[1], 1.0, 0).unwrap();
        assert!(matches!(reweight_embedding(&rel, &counts), Err(Error::ShapeMismatch(_))));
        let lab = toy_embedding(EmbeddingKind::Labeled, 10, 3);
        let rel = privatize_embedding(&lab, 1.0, 0).unwrap();
        assert!(matches!(reweight_embedding(&rel, &counts), Err(Error::ShapeMismatch(_))));
    }
}
