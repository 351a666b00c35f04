//! Random-feature mean embeddings and MMD estimators.
//!
//! Three embedding kinds are supported:
//!
//! - unlabeled: the `D x 1` mean of `phi(x_i)`;
//! - labeled: the `D x C` mean of `phi(x_i) y_i^T` with one-hot `y_i`
//!   (product of a Gaussian kernel on inputs and a linear kernel on labels);
//! - hetero-labeled: as labeled, with `phi` replaced by
//!   `h(x_num, x_cat) = [phi(x_num); x_cat / sqrt(d_cat)]`, the feature map of
//!   the sum of a Gaussian kernel on numerical and a normalized linear kernel
//!   on one-hot categorical columns.
//!
//! Columns of a labeled embedding are per-class sums divided by the total
//! sample count, so empty classes give zero columns.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::featuremap::FeatureMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Unlabeled,
    Labeled,
    HeteroLabeled,
}

impl EmbeddingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbeddingKind::Unlabeled => "unlabeled",
            EmbeddingKind::Labeled => "labeled",
            EmbeddingKind::HeteroLabeled => "hetero_labeled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unlabeled" => Some(EmbeddingKind::Unlabeled),
            "labeled" => Some(EmbeddingKind::Labeled),
            "hetero_labeled" => Some(EmbeddingKind::HeteroLabeled),
            _ => None,
        }
    }

    /// Bound on the Frobenius norm of a non-private embedding, which is also
    /// half its replace-one sensitivity times `m`.
    pub fn norm_bound(self) -> f64 {
        match self {
            EmbeddingKind::Unlabeled | EmbeddingKind::Labeled => 1.0,
            EmbeddingKind::HeteroLabeled => std::f64::consts::SQRT_2,
        }
    }
}

/// One record: normalized numerical features, concatenated one-hot
/// categorical blocks (possibly empty) and a class index.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub x_num: Vec<f64>,
    pub x_cat: Vec<f64>,
    pub y: usize,
}

impl LabeledPoint {
    pub fn new(x_num: Vec<f64>, x_cat: Vec<f64>, y: usize) -> Self {
        Self { x_num, x_cat, y }
    }
}

/// A `D_eff x C` mean embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanEmbedding {
    pub values: Array2<f64>,
    pub num_samples: usize,
    pub kind: EmbeddingKind,
}

impl MeanEmbedding {
    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `mean_i phi(x_i)` as a `D x 1` embedding.
pub fn mean_embedding<P: AsRef<[f64]>>(points: &[P], map: &FeatureMap) -> Result<MeanEmbedding> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = map.num_features();
    let mut sum = vec![0.0; d];
    let mut phi = vec![0.0; d];
    for p in points {
        map.featurize_into(p.as_ref(), &mut phi)?;
        for (s, v) in sum.iter_mut().zip(&phi) {
            *s += v;
        }
    }
    let m = points.len() as f64;
    let values = Array2::from_shape_fn((d, 1), |(j, _)| sum[j] / m);
    Ok(MeanEmbedding { values, num_samples: points.len(), kind: EmbeddingKind::Unlabeled })
}

fn check_binary(x_cat: &[f64]) -> Result<()> {
    match x_cat.iter().find(|&&v| v != 0.0 && v != 1.0) {
        Some(&value) => Err(Error::NonBinaryCategorical { value }),
        None => Ok(()),
    }
}

/// Writes `[phi(x_num); x_cat / sqrt(d_cat)]` into `out` without validating
/// that `x_cat` is binary. The generator uses this with soft categorical
/// outputs.
pub(crate) fn hetero_feature_into(x_num: &[f64], x_cat: &[f64], map: &FeatureMap, out: &mut [f64]) -> Result<()> {
    let d = map.num_features();
    if out.len() != d + x_cat.len() {
        return Err(Error::DimensionMismatch { expected: d + x_cat.len(), found: out.len() });
    }
    let (phi, cat) = out.split_at_mut(d);
    map.featurize_into(x_num, phi)?;
    let inv = 1.0 / (x_cat.len() as f64).sqrt();
    for (o, v) in cat.iter_mut().zip(x_cat) {
        *o = v * inv;
    }
    Ok(())
}

/// `h(x_num, x_cat) = [phi(x_num); x_cat / sqrt(d_cat)]`, length `D + d_cat`.
pub fn hetero_feature(x_num: &[f64], x_cat: &[f64], map: &FeatureMap) -> Result<Vec<f64>> {
    if x_cat.is_empty() {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    check_binary(x_cat)?;
    let mut out = vec![0.0; map.num_features() + x_cat.len()];
    hetero_feature_into(x_num, x_cat, map, &mut out)?;
    Ok(out)
}

/// Labeled (or hetero-labeled, when points carry categorical columns) mean
/// embedding: column `c` is `(1/m) sum_{y_i = c} feature(x_i)`.
pub fn labeled_mean_embedding(points: &[LabeledPoint], map: &FeatureMap, num_classes: usize) -> Result<MeanEmbedding> {
    let first = points.first().ok_or(Error::EmptyDataset)?;
    if num_classes == 0 {
        return Err(Error::InvalidConfig("num_classes must be at least 1".into()));
    }
    let d_cat = first.x_cat.len();
    let kind = if d_cat == 0 { EmbeddingKind::Labeled } else { EmbeddingKind::HeteroLabeled };
    let rows = map.num_features() + d_cat;
    let mut sums = Array2::<f64>::zeros((rows, num_classes));
    let mut feature = vec![0.0; rows];
    for p in points {
        if p.y >= num_classes {
            return Err(Error::LabelOutOfRange { label: p.y, num_classes });
        }
        if p.x_cat.len() != d_cat {
            return Err(Error::DimensionMismatch { expected: d_cat, found: p.x_cat.len() });
        }
        if d_cat == 0 {
            map.featurize_into(&p.x_num, &mut feature)?;
        } else {
            check_binary(&p.x_cat)?;
            hetero_feature_into(&p.x_num, &p.x_cat, map, &mut feature)?;
        }
        let mut col = sums.column_mut(p.y);
        for (s, v) in col.iter_mut().zip(&feature) {
            *s += v;
        }
    }
    let m = points.len() as f64;
    sums.mapv_inplace(|v| v / m);
    Ok(MeanEmbedding { values: sums, num_samples: points.len(), kind })
}

/// Squared Frobenius distance between two embeddings of the same shape and
/// kind.
pub fn mmd_rf_sq(a: &MeanEmbedding, b: &MeanEmbedding) -> Result<f64> {
    if a.kind != b.kind {
        return Err(Error::ShapeMismatch(format!("kinds differ: {} vs {}", a.kind.as_str(), b.kind.as_str())));
    }
    if a.values.dim() != b.values.dim() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.values.dim(), b.values.dim())));
    }
    Ok(a.values.iter().zip(b.values.iter()).map(|(p, q)| (p - q) * (p - q)).sum())
}

/// Biased V-statistic MMD^2 with an arbitrary kernel:
/// `mean k(x,x) + mean k(x',x') - 2 mean k(x,x')`.
pub fn mmd_full_sq<T, K>(x: &[T], x_prime: &[T], kernel: K) -> Result<f64>
where
    K: Fn(&T, &T) -> f64,
{
    if x.is_empty() || x_prime.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mean_over = |a: &[T], b: &[T]| {
        let mut total = 0.0;
        for p in a {
            for q in b {
                total += kernel(p, q);
            }
        }
        total / (a.len() as f64 * b.len() as f64)
    };
    Ok(mean_over(x, x) + mean_over(x_prime, x_prime) - 2.0 * mean_over(x, x_prime))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featuremap::exact_gaussian_kernel;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn points(n: usize, d: usize, shift: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..d).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect()).collect()
    }

    fn one_hot_blocks(blocks: &[usize], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut out = Vec::new();
        for &k in blocks {
            let hot = rng.random_range(0..k);
            out.extend((0..k).map(|i| if i == hot { 1.0 } else { 0.0 }));
        }
        out
    }

    #[test]
    fn single_point_embedding_is_its_feature() {
        let map = FeatureMap::sample(3, 20, 1.0, 1).unwrap();
        let x = vec![0.1, 0.2, -0.3];
        let emb = mean_embedding(&[x.clone()], &map).unwrap();
        assert_eq!(emb.values.column(0).to_vec(), map.featurize(&x).unwrap());
        let copies = vec![x.clone(); 17];
        let emb = mean_embedding(&copies, &map).unwrap();
        for (a, b) in emb.values.iter().zip(map.featurize(&x).unwrap()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn embedding_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = points(37, 4, 0.0, &mut rng);
        let map = FeatureMap::sample(4, 30, 1.5, 2).unwrap();
        let emb = mean_embedding(&pts, &map).unwrap();
        let s = (2.0f64 / 30.0).sqrt();
        for j in 0..15 {
            let w = map.frequencies().row(j).to_vec();
            let mut c = 0.0;
            let mut si = 0.0;
            for p in &pts {
                let a: f64 = w.iter().zip(p).map(|(u, v)| u * v).sum();
                c += s * a.cos();
                si += s * a.sin();
            }
            assert_abs_diff_eq!(emb.values[[j, 0]], c / 37.0, epsilon = 1e-12);
            assert_abs_diff_eq!(emb.values[[j + 15, 0]], si / 37.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_inputs_rejected() {
        let map = FeatureMap::sample(2, 4, 1.0, 0).unwrap();
        let none: Vec<Vec<f64>> = vec![];
        assert!(matches!(mean_embedding(&none, &map), Err(Error::EmptyDataset)));
        assert!(matches!(labeled_mean_embedding(&[], &map, 2), Err(Error::EmptyDataset)));
        assert!(matches!(mmd_full_sq(&none, &none, |_, _| 1.0), Err(Error::EmptyDataset)));
    }

    #[test]
    fn single_labeled_point_fills_one_column() {
        let map = FeatureMap::sample(2, 10, 1.0, 5).unwrap();
        let p = LabeledPoint::new(vec![0.5, -0.5], vec![], 2);
        let emb = labeled_mean_embedding(&[p.clone()], &map, 3).unwrap();
        assert_eq!(emb.kind, EmbeddingKind::Labeled);
        assert!(emb.values.column(0).iter().all(|&v| v == 0.0));
        assert!(emb.values.column(1).iter().all(|&v| v == 0.0));
        assert_eq!(emb.values.column(2).to_vec(), map.featurize(&p.x_num).unwrap());
    }

    #[test]
    fn empty_class_gives_zero_column_and_bad_label_errors() {
        let map = FeatureMap::sample(1, 6, 1.0, 5).unwrap();
        let pts: Vec<_> = (0..5).map(|i| LabeledPoint::new(vec![i as f64], vec![], 0)).collect();
        let emb = labeled_mean_embedding(&pts, &map, 2).unwrap();
        assert!(emb.values.column(1).iter().all(|&v| v == 0.0));
        let bad = vec![LabeledPoint::new(vec![0.0], vec![], 2)];
        assert!(matches!(
            labeled_mean_embedding(&bad, &map, 2),
            Err(Error::LabelOutOfRange { label: 2, num_classes: 2 })
        ));
    }

    #[test]
    fn column_decomposition_matches_per_class_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let map = FeatureMap::sample(3, 16, 1.0, 4).unwrap();
        let pts: Vec<_> = points(60, 3, 0.0, &mut rng)
            .into_iter()
            .map(|x| LabeledPoint::new(x, vec![], rng.random_range(0..4)))
            .collect();
        let emb = labeled_mean_embedding(&pts, &map, 4).unwrap();
        for c in 0..4 {
            let class_pts: Vec<Vec<f64>> = pts.iter().filter(|p| p.y == c).map(|p| p.x_num.clone()).collect();
            let partial = mean_embedding(&class_pts, &map).unwrap();
            let frac = class_pts.len() as f64 / 60.0;
            for j in 0..16 {
                assert_abs_diff_eq!(emb.values[[j, c]], partial.values[[j, 0]] * frac, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn product_kernel_identity_on_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let map = FeatureMap::sample(2, 40, 1.0, 6).unwrap();
        let pts: Vec<_> = points(40, 2, 0.0, &mut rng)
            .into_iter()
            .enumerate()
            .map(|(i, x)| LabeledPoint::new(x, vec![], i % 2))
            .collect();
        let emb = labeled_mean_embedding(&pts, &map, 2).unwrap();
        for _ in 0..20 {
            let probe_x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            let probe_y = rng.random_range(0..2);
            // <vec(mu), vec(phi(x) y^T)> = mu[:, y] . phi(x)
            let phi = map.featurize(&probe_x).unwrap();
            let inner: f64 = emb.values.column(probe_y).iter().zip(&phi).map(|(a, b)| a * b).sum();
            let oracle = pts
                .iter()
                .map(|p| map.approx_kernel(&p.x_num, &probe_x).unwrap() * if p.y == probe_y { 1.0 } else { 0.0 })
                .sum::<f64>()
                / pts.len() as f64;
            assert_abs_diff_eq!(inner, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn hetero_feature_layout_and_norm() {
        let map = FeatureMap::sample(2, 8, 1.0, 1).unwrap();
        let h = hetero_feature(&[0.2, 0.4], &[1.0, 0.0, 0.0, 0.0], &map).unwrap();
        assert_eq!(h.len(), 12);
        assert_eq!(&h[8..], &[0.5, 0.0, 0.0, 0.0]);
        let norm: f64 = h.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 1.25f64.sqrt(), epsilon = 1e-12);
        assert!(matches!(
            hetero_feature(&[0.2, 0.4], &[0.5, 0.5], &map),
            Err(Error::NonBinaryCategorical { .. })
        ));
        let all_ones = hetero_feature(&[0.0, 0.0], &[1.0, 1.0, 1.0], &map).unwrap();
        let norm: f64 = all_ones.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_abs_diff_eq!(norm, 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn hetero_sum_kernel_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let map = FeatureMap::sample(3, 24, 0.9, 7).unwrap();
        let blocks = [3, 2, 4];
        for _ in 0..50 {
            let a_num: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let b_num: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
            let a_cat = one_hot_blocks(&blocks, &mut rng);
            let b_cat = one_hot_blocks(&blocks, &mut rng);
            let ha = hetero_feature(&a_num, &a_cat, &map).unwrap();
            let hb = hetero_feature(&b_num, &b_cat, &map).unwrap();
            let inner: f64 = ha.iter().zip(&hb).map(|(p, q)| p * q).sum();
            let cat: f64 = a_cat.iter().zip(&b_cat).map(|(p, q)| p * q).sum();
            let oracle = map.approx_kernel(&a_num, &b_num).unwrap() + cat / 9.0;
            assert_abs_diff_eq!(inner, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn mmd_rf_identity_and_shape_checks() {
        let map = FeatureMap::sample(2, 10, 1.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = points(20, 2, 0.0, &mut rng);
        let a = mean_embedding(&pts, &map).unwrap();
        let b = mean_embedding(&pts, &map).unwrap();
        assert_eq!(mmd_rf_sq(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(mmd_rf_sq(&a, &b).unwrap(), 0.0, epsilon = 1e-12);
        let lab: Vec<_> = pts.iter().map(|x| LabeledPoint::new(x.clone(), vec![], 0)).collect();
        let c = labeled_mean_embedding(&lab, &map, 2).unwrap();
        assert!(matches!(mmd_rf_sq(&a, &c), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn mmd_rf_matches_pairwise_double_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let map = FeatureMap::sample(3, 64, 1.2, 3).unwrap();
        let x = points(50, 3, 0.0, &mut rng);
        let y = points(50, 3, 0.7, &mut rng);
        let rf = mmd_rf_sq(&mean_embedding(&x, &map).unwrap(), &mean_embedding(&y, &map).unwrap()).unwrap();
        let full = mmd_full_sq(&x, &y, |a, b| map.approx_kernel(a, b).unwrap()).unwrap();
        assert_abs_diff_eq!(rf, full, epsilon = 1e-9);

        let x = points(30, 3, 0.0, &mut rng);
        let y = points(40, 3, -0.4, &mut rng);
        let rf = mmd_rf_sq(&mean_embedding(&y, &map).unwrap(), &mean_embedding(&x, &map).unwrap()).unwrap();
        let full = mmd_full_sq(&x, &y, |a, b| map.approx_kernel(a, b).unwrap()).unwrap();
        assert_abs_diff_eq!(rf, full, epsilon = 1e-9);
    }

    #[test]
    fn exact_mmd_on_singletons() {
        let a = vec![vec![0.0, 1.0]];
        let b = vec![vec![2.0, -1.0]];
        let g = 1.7;
        let v = mmd_full_sq(&a, &b, |p, q| exact_gaussian_kernel(p, q, g)).unwrap();
        assert_abs_diff_eq!(v, 2.0 - 2.0 * (-8.0 / (2.0 * g * g)).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(mmd_full_sq(&a, &a, |p, q| exact_gaussian_kernel(p, q, g)).unwrap(), 0.0, epsilon = 1e-12);
    }
}
