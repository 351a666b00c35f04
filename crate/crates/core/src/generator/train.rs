//! Adam training against a fixed release, and synthetic sampling.

use ndarray::{s, Array2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use super::{forward, loss_and_grad, Batch, GeneratorParams};
use crate::data::{argmax, Dataset, Provenance, Schema};
use crate::embedding::LabeledPoint;
use crate::error::{Error, Result};
use crate::featuremap::FeatureMap;
use crate::privacy::EmbeddingRelease;
use crate::rng;

/// How generated labels are drawn during training.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSampling {
    Uniform,
    /// Class probabilities, e.g. from noisy class counts.
    Proportional(Vec<f64>),
}

impl LabelSampling {
    /// Class probabilities for `num_classes` classes.
    pub fn probabilities(&self, num_classes: usize) -> Vec<f64> {
        match self {
            LabelSampling::Uniform => vec![1.0 / num_classes as f64; num_classes],
            LabelSampling::Proportional(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    /// Synthetic samples per step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub labels: LabelSampling,
    /// Gumbel-softmax relaxation of categorical outputs.
    pub gumbel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 2000, batch_size: 500, learning_rate: 1e-2, seed: 0, labels: LabelSampling::Uniform, gumbel: false }
    }
}

impl TrainConfig {
    fn validate(&self, num_classes: usize) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if let LabelSampling::Proportional(p) = &self.labels {
            if p.len() != num_classes {
                return Err(Error::InvalidConfig(format!("{} label probabilities for {num_classes} classes", p.len())));
            }
        }
        Ok(())
    }
}

/// Adam with the usual defaults `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Debug, Clone)]
pub struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    first: Vec<f64>,
    second: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(num_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, &g), m), v) in theta.iter_mut().zip(grad).zip(&mut self.first).zip(&mut self.second) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.learning_rate * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: GeneratorParams,
    /// Loss at each step, evaluated before that step's update.
    pub trace: Vec<f64>,
}

fn label_sampler(probs: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(probs).map_err(|e| Error::InvalidConfig(format!("label distribution: {e}")))
}

/// Minimizes the random-feature MMD to `release` with a fresh synthetic
/// batch at every step. Only the release and the feature map are consulted.
pub fn train(
    mut params: GeneratorParams,
    release: &EmbeddingRelease,
    map: &FeatureMap,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let arch = params.arch().clone();
    config.validate(arch.num_classes)?;
    let labels = label_sampler(&config.labels.probabilities(arch.num_classes))?;
    let mut rng = rng::seeded(config.seed, rng::stream::TRAIN);
    let mut adam = Adam::new(params.num_params(), config.learning_rate);
    let mut theta = params.to_flat();
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch = Batch::sample(&arch, config.batch_size, config.gumbel, &mut rng, |r| labels.sample(r));
        let (loss, grad) = loss_and_grad(&params, release, map, &batch)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::DivergedLoss { step });
        }
        trace.push(loss);
        adam.step(&mut theta, &grad);
        params.set_flat(&theta)?;
        if step % 100 == 0 {
            log::debug!("step {step}: loss {loss:.6e}");
        }
    }
    if !params.is_finite() {
        return Err(Error::DivergedLoss { step: config.steps });
    }
    Ok(TrainOutcome { params, trace })
}

const SAMPLE_CHUNK: usize = 4096;

/// Draws `n` records: labels from `label_dist`, latent codes from
/// `N(0, I)`, categorical blocks hardened to one-hot by argmax and
/// numerical columns clipped to `[0, 1]`.
pub fn sample(params: &GeneratorParams, n: usize, label_dist: &[f64], seed: u64, schema: &Schema) -> Result<Dataset> {
    let arch = params.arch();
    if schema.num_numerical() != arch.output.num_numerical || schema.categorical_blocks() != arch.output.categorical_blocks {
        return Err(Error::InvalidSchema("schema columns do not match the generator outputs".into()));
    }
    if arch.num_classes > schema.num_classes() {
        return Err(Error::InvalidSchema(format!(
            "generator has {} classes, schema label has {}",
            arch.num_classes,
            schema.num_classes()
        )));
    }
    if label_dist.len() != arch.num_classes {
        return Err(Error::InvalidConfig(format!("{} label probabilities for {} classes", label_dist.len(), arch.num_classes)));
    }
    let labels = label_sampler(label_dist)?;
    let mut rng = rng::seeded(seed, rng::stream::SAMPLE);
    let d_num = arch.output.num_numerical;
    let mut rows = Vec::with_capacity(n);
    let mut remaining = n;
    while remaining > 0 {
        let m = remaining.min(SAMPLE_CHUNK);
        let batch = Batch::sample(arch, m, false, &mut rng, |r| labels.sample(r));
        let out = forward(params, &batch)?;
        rows.extend(harden(&out, d_num, &arch.output.categorical_blocks, &batch.labels));
        remaining -= m;
    }
    Dataset::new(schema.clone(), rows, Provenance::Synthetic("generator sample".into()))
}

fn harden(out: &Array2<f64>, d_num: usize, blocks: &[usize], labels: &[usize]) -> Vec<LabeledPoint> {
    out.rows()
        .into_iter()
        .zip(labels)
        .map(|(row, &y)| {
            let x_num = row.slice(s![..d_num]).iter().map(|v| v.clamp(0.0, 1.0)).collect();
            let mut x_cat = vec![0.0; row.len() - d_num];
            let mut offset = 0;
            for &w in blocks {
                let block = row.slice(s![d_num + offset..d_num + offset + w]);
                let winner = argmax(&block.to_vec());
                x_cat[offset + winner] = 1.0;
                offset += w;
            }
            LabeledPoint::new(x_num, x_cat, y)
        })
        .collect()
}
