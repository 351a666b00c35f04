//! The 5 x 5 Gaussian-grid mixture benchmark.

use rand::Rng;
use rand_distr::StandardNormal;

use super::schema::{normalize, Column, ColumnKind, Schema};
use super::{Dataset, Provenance};
use crate::embedding::LabeledPoint;
use crate::error::{Error, Result};
use crate::rng;

const GRID_SIDE: usize = 5;

/// 25 isotropic Gaussians on a square grid centred at the origin. Class `c`
/// owns the five components of grid row `c`; each component has weight
/// `1/25`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMixture {
    pub spacing: f64,
    pub std: f64,
    pub samples_per_component: usize,
    pub test_fraction: f64,
}

impl Default for GridMixture {
    fn default() -> Self {
        Self { spacing: 1.0, std: 0.2, samples_per_component: 4000, test_fraction: 0.1 }
    }
}

impl GridMixture {
    pub fn num_components(&self) -> usize {
        GRID_SIDE * GRID_SIDE
    }

    pub fn num_classes(&self) -> usize {
        GRID_SIDE
    }

    /// Mean of component `j`, which sits in grid row `j / 5`, column `j % 5`.
    pub fn mean(&self, j: usize) -> [f64; 2] {
        let (row, col) = (j / GRID_SIDE, j % GRID_SIDE);
        let half = (GRID_SIDE / 2) as f64;
        [(col as f64 - half) * self.spacing, (row as f64 - half) * self.spacing]
    }

    pub fn class_of(&self, j: usize) -> usize {
        j / GRID_SIDE
    }

    pub fn components_of(&self, class: usize) -> std::ops::Range<usize> {
        class * GRID_SIDE..(class + 1) * GRID_SIDE
    }

    /// Coordinate range used to scale samples into `[0, 1]`: the outermost
    /// means plus ten component standard deviations.
    pub fn bounds(&self) -> (f64, f64) {
        let reach = (GRID_SIDE / 2) as f64 * self.spacing + 10.0 * self.std;
        (-reach, reach)
    }

    pub fn schema(&self) -> Schema {
        let range = Some(self.bounds());
        let levels = (0..self.num_classes()).map(|c| c.to_string()).collect();
        Schema::new(vec![
            Column { name: "x1".into(), kind: ColumnKind::Numerical { range } },
            Column { name: "x2".into(), kind: ColumnKind::Numerical { range } },
            Column { name: "class".into(), kind: ColumnKind::Label { levels } },
        ])
        .expect("grid schema is valid")
    }

    /// `log p(x, y) = log sum_{j in class y} (1/25) N(x; mu_j, std^2 I)`.
    pub fn log_density(&self, x: [f64; 2], class: usize) -> f64 {
        let var = self.std * self.std;
        let log_norm = -(self.num_components() as f64).ln() - (2.0 * std::f64::consts::PI * var).ln();
        let terms: Vec<f64> = self
            .components_of(class)
            .map(|j| {
                let m = self.mean(j);
                let d2 = (x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2);
                log_norm - d2 / (2.0 * var)
            })
            .collect();
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()
    }

    fn train_per_component(&self) -> usize {
        let test = (self.samples_per_component as f64 * self.test_fraction).round() as usize;
        self.samples_per_component - test.min(self.samples_per_component)
    }
}

/// The default benchmark: 4000 samples per component, 3600 of them for
/// training, giving 90000 training and 10000 test records.
pub fn make_gaussian_grid(seed: u64) -> (Dataset, Dataset, GridMixture) {
    make_gaussian_grid_with(GridMixture::default(), seed)
}

/// Samples every component in turn and splits each one into its first
/// training and last test draws.
pub fn make_gaussian_grid_with(mixture: GridMixture, seed: u64) -> (Dataset, Dataset, GridMixture) {
    let mut rng = rng::seeded(seed, rng::stream::DATA);
    let bounds = mixture.bounds();
    let n_train = mixture.train_per_component();
    let mut train = Vec::with_capacity(n_train * mixture.num_components());
    let mut test = Vec::new();
    for j in 0..mixture.num_components() {
        let m = mixture.mean(j);
        for i in 0..mixture.samples_per_component {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let x_num = vec![normalize(m[0] + mixture.std * a, bounds), normalize(m[1] + mixture.std * b, bounds)];
            let point = LabeledPoint::new(x_num, Vec::new(), mixture.class_of(j));
            if i < n_train {
                train.push(point);
            } else {
                test.push(point);
            }
        }
    }
    let schema = mixture.schema();
    let train = Dataset::new(schema.clone(), train, Provenance::Synthetic("gaussian grid (train)".into()))
        .expect("grid rows match schema");
    let test = Dataset::new(schema, test, Provenance::Synthetic("gaussian grid (test)".into())).expect("grid rows match schema");
    (train, test, mixture)
}

/// Mean negative log density of labeled 2-D points given in original units.
pub fn nll(points: &[LabeledPoint], mixture: &GridMixture) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for p in points {
        if p.x_num.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, found: p.x_num.len() });
        }
        if p.y >= mixture.num_classes() {
            return Err(Error::LabelOutOfRange { label: p.y, num_classes: mixture.num_classes() });
        }
        total -= mixture.log_density([p.x_num[0], p.x_num[1]], p.y);
    }
    Ok(total / points.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes_and_stratification() {
        let (train, test, mix) = make_gaussian_grid(11);
        assert_eq!(train.len(), 90_000);
        assert_eq!(test.len(), 10_000);
        assert_eq!(train.class_counts(), vec![18_000; 5]);
        assert_eq!(test.class_counts(), vec![2_000; 5]);
        let raw = train.raw_points();
        for j in 0..25 {
            let chunk = &raw[j * 3600..(j + 1) * 3600];
            let m = mix.mean(j);
            let tol = 4.0 * 0.2 / 3600f64.sqrt();
            for axis in 0..2 {
                let mean = chunk.iter().map(|p| p.x_num[axis]).sum::<f64>() / 3600.0;
                assert!((mean - m[axis]).abs() < tol, "component {j} axis {axis}: {mean}");
            }
            assert!(chunk.iter().all(|p| p.y == mix.class_of(j)));
        }
        let (again, _, _) = make_gaussian_grid(11);
        assert_eq!(again, train);
    }

    #[test]
    fn nll_examples() {
        let mix = GridMixture::default();
        let at_mean = LabeledPoint::new(mix.mean(12).to_vec(), vec![], 2);
        let expected = -(1.0 / (25.0 * 2.0 * std::f64::consts::PI * 0.04)).ln();
        let v = nll(std::slice::from_ref(&at_mean), &mix).unwrap();
        // two same-class neighbours at distance 1 add under 4e-6 each
        assert!((v - expected).abs() < 8e-6, "{v} vs {expected}");
        assert!((v - 1.838).abs() < 1e-3);
        let far = LabeledPoint::new(vec![12.0, 12.0], vec![], 0);
        assert!(nll(std::slice::from_ref(&far), &mix).unwrap() > 100.0);
        let pts = vec![at_mean.clone(), far.clone()];
        let doubled = vec![at_mean.clone(), far.clone(), at_mean, far];
        assert!((nll(&pts, &mix).unwrap() - nll(&doubled, &mix).unwrap()).abs() < 1e-12);
        assert!(matches!(nll(&[], &mix), Err(Error::EmptyDataset)));
    }

    #[test]
    fn density_integrates_to_one() {
        let mix = GridMixture::default();
        let (lo, hi) = (-4.0, 4.0);
        let mut rng = rng::seeded(3, 0);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = [rng.random_range(lo..hi), rng.random_range(lo..hi)];
            sum += (0..5).map(|c| mix.log_density(x, c).exp()).sum::<f64>();
        }
        let integral = sum / n as f64 * (hi - lo) * (hi - lo);
        assert!((integral - 1.0).abs() < 0.01, "{integral}");
    }

    #[test]
    fn bounds_cover_samples() {
        let mix = GridMixture::default();
        assert_eq!(mix.bounds(), (-4.0, 4.0));
        assert_eq!(mix.mean(0), [-2.0, -2.0]);
        assert_eq!(mix.mean(24), [2.0, 2.0]);
    }
}
