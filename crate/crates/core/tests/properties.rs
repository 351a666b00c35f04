//! Property tests over the public API.

use dpmerf::data::{denormalize, normalize, Schema};
use dpmerf::embedding::{hetero_feature, labeled_mean_embedding, mean_embedding, mmd_rf_sq, LabeledPoint};
use dpmerf::eval::roc_auc;
use dpmerf::featuremap::{exact_gaussian_kernel, FeatureMap};
use dpmerf::generator::{forward, init_generator, sample, Architecture, Batch, Model, OutputSpec, ReleaseInfo};
use dpmerf::embedding::EmbeddingKind;
use dpmerf::privacy::{calibrate_sigma, epsilon_for_sigma, PrivacyBudget};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, d)
}

fn one_hot(blocks: &[usize], picks: &[usize]) -> Vec<f64> {
    blocks.iter().zip(picks).flat_map(|(&w, &p)| (0..w).map(move |k| if k == p % w { 1.0 } else { 0.0 })).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn features_have_unit_norm(x in point(4), seed in 0u64..1000, half in 1usize..64, gamma in 0.1..5.0f64) {
        let map = FeatureMap::sample(4, 2 * half, gamma, seed).unwrap();
        let phi = map.featurize(&x).unwrap();
        let norm: f64 = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn approx_kernel_is_symmetric_and_shift_invariant(x in point(3), y in point(3), t in point(3), seed in 0u64..1000) {
        let map = FeatureMap::sample(3, 100, 1.0, seed).unwrap();
        let k = map.approx_kernel(&x, &y).unwrap();
        prop_assert_eq!(k.to_bits(), map.approx_kernel(&y, &x).unwrap().to_bits());
        let xs: Vec<f64> = x.iter().zip(&t).map(|(a, b)| a + b).collect();
        let ys: Vec<f64> = y.iter().zip(&t).map(|(a, b)| a + b).collect();
        prop_assert!((map.approx_kernel(&xs, &ys).unwrap() - k).abs() < 1e-9);
        prop_assert!(k.abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn exact_kernel_is_bounded(x in point(3), y in point(3), gamma in 0.1..5.0f64) {
        let k = exact_gaussian_kernel(&x, &y, gamma);
        prop_assert!((0.0..=1.0).contains(&k));
        prop_assert_eq!(exact_gaussian_kernel(&x, &x, gamma), 1.0);
    }

    #[test]
    fn mmd_is_nonnegative_and_zero_on_self(xs in prop::collection::vec(point(2), 1..20), ys in prop::collection::vec(point(2), 1..20), seed in 0u64..100) {
        let map = FeatureMap::sample(2, 50, 1.0, seed).unwrap();
        let a = mean_embedding(&xs, &map).unwrap();
        let b = mean_embedding(&ys, &map).unwrap();
        prop_assert!(mmd_rf_sq(&a, &b).unwrap() >= 0.0);
        prop_assert_eq!(mmd_rf_sq(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn embeddings_respect_norm_bounds(
        rows in prop::collection::vec((point(2), prop::collection::vec(0usize..4, 2), 0usize..3), 1..30),
        seed in 0u64..100,
    ) {
        let blocks = [3usize, 4];
        let map = FeatureMap::sample(2, 30, 0.7, seed).unwrap();
        let pts: Vec<LabeledPoint> = rows.iter().map(|(x, c, y)| LabeledPoint::new(x.clone(), one_hot(&blocks, c), *y)).collect();
        for p in &pts {
            let h = hetero_feature(&p.x_num, &p.x_cat, &map).unwrap();
            prop_assert!((h.iter().map(|v| v * v).sum::<f64>() - (1.0 + 2.0 / 7.0)).abs() < 1e-12);
        }
        let hetero = labeled_mean_embedding(&pts, &map, 3).unwrap();
        prop_assert!(hetero.frobenius_norm() <= hetero.kind.norm_bound() + 1e-12);
        let plain: Vec<LabeledPoint> = pts.iter().map(|p| LabeledPoint::new(p.x_num.clone(), vec![], p.y)).collect();
        let labeled = labeled_mean_embedding(&plain, &map, 3).unwrap();
        prop_assert!(labeled.frobenius_norm() <= 1.0 + 1e-12);
        let xs: Vec<Vec<f64>> = pts.iter().map(|p| p.x_num.clone()).collect();
        prop_assert!(mean_embedding(&xs, &map).unwrap().frobenius_norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn epsilon_decreases_with_sigma(s in 0.3..20.0f64, factor in 1.01..3.0f64, releases in 1u32..4) {
        let lo = epsilon_for_sigma(s, releases, 1e-5).unwrap().epsilon;
        let hi = epsilon_for_sigma(s * factor, releases, 1e-5).unwrap().epsilon;
        prop_assert!(hi <= lo);
    }

    #[test]
    fn composition_is_subadditive(s in 0.5..20.0f64) {
        let one = epsilon_for_sigma(s, 1, 1e-5).unwrap().epsilon;
        let two = epsilon_for_sigma(s, 2, 1e-5).unwrap().epsilon;
        prop_assert!(two >= one);
        prop_assert!(two <= 2.0 * one + 1e-12);
    }

    #[test]
    fn roc_auc_ignores_monotone_transforms(scores in prop::collection::vec(-3.0..3.0f64, 4..40), seed in 0u64..1000) {
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        let mut labels: Vec<bool> = scores.iter().map(|_| r.random_bool(0.5)).collect();
        labels[0] = true;
        labels[1] = false;
        let auc = roc_auc(&scores, &labels).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| (2.0 * s).exp() + 7.0).collect();
        prop_assert!((auc - roc_auc(&squashed, &labels).unwrap()).abs() < 1e-12);
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        prop_assert!((auc + roc_auc(&scores, &flipped).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&auc));
    }

    #[test]
    fn normalize_roundtrips_inside_range(lo in -100.0..100.0f64, width in 0.01..100.0f64, t in 0.0..1.0f64) {
        let range = (lo, lo + width);
        let v = lo + t * width;
        let n = normalize(v, range);
        prop_assert!((0.0..=1.0).contains(&n));
        prop_assert!((denormalize(n, range) - v).abs() < 1e-9 * (1.0 + v.abs()));
        prop_assert_eq!(normalize(lo - 1.0, range), 0.0);
        prop_assert_eq!(normalize(lo + width + 1.0, range), 1.0);
    }

    #[test]
    fn generator_outputs_live_on_the_simplex(seed in 0u64..1000, gumbel in any::<bool>(), num in 0usize..3) {
        let blocks = vec![2usize, 3, 4];
        let arch = Architecture {
            latent_dim: 4,
            num_classes: 3,
            hidden: vec![8],
            output: OutputSpec { num_numerical: num, categorical_blocks: blocks.clone() },
        };
        let params = init_generator(&arch, seed).unwrap();
        let mut r = ChaCha20Rng::seed_from_u64(seed);
        let batch = Batch::sample(&arch, 16, gumbel, &mut r, |g| g.random_range(0..3));
        let out = forward(&params, &batch).unwrap();
        for row in out.rows() {
            prop_assert!(row.iter().take(num).all(|v| (0.0..=1.0).contains(v)));
            let mut at = num;
            for &w in &blocks {
                let block = row.slice(ndarray::s![at..at + w]);
                prop_assert!(block.iter().all(|&v| v >= 0.0));
                prop_assert!((block.sum() - 1.0).abs() < 1e-12);
                at += w;
            }
        }
    }

    #[test]
    fn model_files_roundtrip(seed in 0u64..1000, hidden in prop::collection::vec(1usize..12, 0..3)) {
        let schema = Schema::parse("a: numerical 0.0 2.0\nc: categorical x|y|z\nlabel: label n|p\n").unwrap();
        let arch = Architecture {
            latent_dim: 3,
            num_classes: 2,
            hidden,
            output: OutputSpec { num_numerical: 1, categorical_blocks: vec![3] },
        };
        let model = Model {
            map: FeatureMap::sample(1, 8, 0.3, seed).unwrap(),
            schema,
            params: init_generator(&arch, seed).unwrap(),
            release: ReleaseInfo {
                mode: "hetero".into(),
                kind: EmbeddingKind::HeteroLabeled,
                num_samples: 10,
                sensitivity: 0.28,
                sigma: 4.0,
                epsilon: 0.99,
                target_epsilon: 1.0,
                delta: 1e-5,
                alpha: 12.0,
                num_releases: 2,
                weighted: seed % 2 == 0,
                noise_seed: seed,
                train_seed: seed + 1,
                prng: "chacha20".into(),
            },
            label_dist: vec![0.25, 0.75],
        };
        let bytes = model.to_bytes();
        let back = Model::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &model);
        let a = sample(&model.params, 20, &model.label_dist, seed, &model.schema).unwrap();
        let b = sample(&back.params, 20, &back.label_dist, seed, &back.schema).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn accountant_beats_classical_calibration() {
    for &eps in &[0.2, 0.5, 1.0] {
        for &delta in &[1e-5, 1e-6] {
            let c = calibrate_sigma(&PrivacyBudget::new(eps, delta, 1).unwrap()).unwrap();
            let classical = (2.0 * (1.25f64 / delta).ln()).sqrt() / eps;
            assert!(c.sigma <= classical, "eps={eps} delta={delta}: {} > {classical}", c.sigma);
            assert!(c.epsilon <= eps);
        }
    }
}

#[test]
fn approximation_error_shrinks_with_more_features() {
    let mut r = ChaCha20Rng::seed_from_u64(17);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..100)
        .map(|_| {
            let x: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
            (x, y)
        })
        .collect();
    let mean_error = |d: usize| {
        (0..5u64)
            .map(|seed| {
                let map = FeatureMap::sample(3, d, 1.0, seed).unwrap();
                pairs.iter().map(|(x, y)| (map.approx_kernel(x, y).unwrap() - exact_gaussian_kernel(x, y, 1.0)).abs()).sum::<f64>()
            })
            .sum::<f64>()
            / 500.0
    };
    let errors: Vec<f64> = std::iter::successors(Some(64usize), |d| Some(d * 2)).take_while(|&d| d <= 16_384).map(mean_error).collect();
    for w in errors.windows(2) {
        assert!(w[1] < 1.1 * w[0], "{errors:?}");
    }
    // error falls like 1/sqrt(D): 256x more features, about 16x smaller
    assert!(errors[errors.len() - 1] < errors[0] / 8.0, "{errors:?}");
}
