//! Random Fourier features for the Gaussian kernel.
//!
//! A [`FeatureMap`] holds `D/2` frequency vectors drawn from
//! `Normal(0, I / gamma^2)`. A point `x` is mapped to
//!
//! ```text
//! phi(x) = sqrt(2/D) * [cos(w_1.x), ..., cos(w_{D/2}.x), sin(w_1.x), ..., sin(w_{D/2}.x)]
//! ```
//!
//! so `phi(x).phi(x')` is an unbiased estimate of
//! `exp(-|x - x'|^2 / (2 gamma^2))` and `|phi(x)| = 1` for every input.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Default number of sampled pairs for [`median_heuristic_bandwidth`].
pub const DEFAULT_MAX_PAIRS: usize = 10_000;

/// A frozen random-frequency matrix defining the feature map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    frequencies: Array2<f64>,
    num_features: usize,
    bandwidth: f64,
    seed: u64,
}

impl FeatureMap {
    /// Draws `D/2` frequency rows of dimension `input_dim` with entries
    /// `Normal(0, 1/bandwidth^2)`, row-major, from the seeded stream.
    pub fn sample(input_dim: usize, num_features: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if num_features < 2 || !num_features.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "num_features must be even and at least 2, got {num_features}"
            )));
        }
        if input_dim == 0 {
            return Err(Error::InvalidConfig("input dimension must be at least 1".into()));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
        }
        let mut rng = rng::seeded(seed, rng::stream::FREQUENCIES);
        let half = num_features / 2;
        let frequencies = Array2::from_shape_simple_fn((half, input_dim), || {
            let w: f64 = rng.sample(StandardNormal);
            w / bandwidth
        });
        Ok(Self { frequencies, num_features, bandwidth, seed })
    }

    /// Rebuilds a map from stored parts (model files, tests with fixed
    /// frequencies).
    pub fn from_parts(frequencies: Array2<f64>, bandwidth: f64, seed: u64) -> Result<Self> {
        let (half, input_dim) = frequencies.dim();
        if half == 0 || input_dim == 0 {
            return Err(Error::InvalidConfig("frequency matrix must be non-empty".into()));
        }
        if !(bandwidth > 0.0) {
            return Err(Error::InvalidConfig(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { frequencies: frequencies.as_standard_layout().into_owned(), num_features: 2 * half, bandwidth, seed })
    }

    pub fn frequencies(&self) -> ArrayView2<'_, f64> {
        self.frequencies.view()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn input_dim(&self) -> usize {
        self.frequencies.ncols()
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `sqrt(2/D)`, the per-coordinate scale.
    pub fn scale(&self) -> f64 {
        (2.0 / self.num_features as f64).sqrt()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch { expected: self.input_dim(), found: x.len() });
        }
        Ok(())
    }

    /// Writes `phi(x)` into `out` (length `D`).
    pub fn featurize_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_dim(x)?;
        if out.len() != self.num_features {
            return Err(Error::DimensionMismatch { expected: self.num_features, found: out.len() });
        }
        let half = self.num_features / 2;
        let scale = self.scale();
        let (cos_part, sin_part) = out.split_at_mut(half);
        for (j, row) in self.frequencies.outer_iter().enumerate() {
            let phase: f64 = row.iter().zip(x).map(|(w, xi)| w * xi).sum();
            let (s, c) = phase.sin_cos();
            cos_part[j] = scale * c;
            sin_part[j] = scale * s;
        }
        Ok(())
    }

    pub fn featurize(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.num_features];
        self.featurize_into(x, &mut out)?;
        Ok(out)
    }

    /// `phi(x).phi(x')`, always within `[-1, 1]`.
    pub fn approx_kernel(&self, x: &[f64], x_prime: &[f64]) -> Result<f64> {
        let a = self.featurize(x)?;
        let b = self.featurize(x_prime)?;
        Ok(a.iter().zip(&b).map(|(p, q)| p * q).sum())
    }
}

/// `exp(-|x - x'|^2 / (2 gamma^2))`.
pub fn exact_gaussian_kernel(x: &[f64], x_prime: &[f64], bandwidth: f64) -> f64 {
    let sq: f64 = x.iter().zip(x_prime).map(|(a, b)| (a - b) * (a - b)).sum();
    (-sq / (2.0 * bandwidth * bandwidth)).exp()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Median pairwise Euclidean distance between rows.
///
/// When `max_pairs` covers every pair, all `m(m-1)/2` distances are used;
/// otherwise `max_pairs` pairs of distinct rows are drawn uniformly (with
/// replacement) from the seeded stream. Even counts take the mean of the two
/// middle values.
///
/// This reads the data directly and is not privatized.
pub fn median_heuristic_bandwidth<P: AsRef<[f64]>>(points: &[P], max_pairs: usize, seed: u64) -> Result<f64> {
    let m = points.len();
    if m < 2 {
        return Err(Error::DegenerateData(format!("median heuristic needs at least 2 rows, got {m}")));
    }
    if max_pairs == 0 {
        return Err(Error::InvalidConfig("max_pairs must be at least 1".into()));
    }
    let d = points[0].as_ref().len();
    if let Some(bad) = points.iter().find(|p| p.as_ref().len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: bad.as_ref().len() });
    }
    let total_pairs = m * (m - 1) / 2;
    let mut distances = Vec::with_capacity(total_pairs.min(max_pairs));
    if max_pairs >= total_pairs {
        for i in 0..m {
            for j in (i + 1)..m {
                distances.push(euclidean(points[i].as_ref(), points[j].as_ref()));
            }
        }
    } else {
        let mut rng = rng::seeded(seed, rng::stream::PAIRS);
        while distances.len() < max_pairs {
            let i = rng.random_range(0..m);
            let j = rng.random_range(0..m);
            if i != j {
                distances.push(euclidean(points[i].as_ref(), points[j].as_ref()));
            }
        }
    }
    if distances.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateData("every sampled pair has distance 0".into()));
    }
    let gamma = median(&mut distances);
    if gamma > 0.0 {
        Ok(gamma)
    } else {
        Err(Error::DegenerateData("median pairwise distance is 0".into()))
    }
}
