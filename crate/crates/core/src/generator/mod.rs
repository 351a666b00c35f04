//! Conditional fully-connected generator trained against a released
//! embedding.
//!
//! The network maps `[z; onehot(y)]` through ReLU hidden layers to an output
//! row whose first `num_numerical` entries pass through a logistic and whose
//! remaining entries form softmax blocks, one per categorical column.

mod loss;
mod model_file;
mod train;

pub use loss::{loss_and_grad, synthetic_embedding};
pub use model_file::{Model, ReleaseInfo, FORMAT_VERSION, MAGIC};
pub use train::{sample, train, Adam, LabelSampling, TrainConfig, TrainOutcome};

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// Temperature of the optional Gumbel-softmax relaxation.
pub const GUMBEL_TEMPERATURE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputSpec {
    pub num_numerical: usize,
    pub categorical_blocks: Vec<usize>,
}

impl OutputSpec {
    pub fn categorical_width(&self) -> usize {
        self.categorical_blocks.iter().sum()
    }

    pub fn width(&self) -> usize {
        self.num_numerical + self.categorical_width()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub latent_dim: usize,
    pub num_classes: usize,
    pub hidden: Vec<usize>,
    pub output: OutputSpec,
}

impl Architecture {
    /// Default layout: 10 latent dimensions and two hidden layers of 100.
    pub fn new(num_classes: usize, output: OutputSpec) -> Self {
        Self { latent_dim: 10, num_classes, hidden: vec![100, 100], output }
    }

    pub fn input_dim(&self) -> usize {
        self.latent_dim + self.num_classes
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::InvalidArch("num_classes must be positive".into()));
        }
        if self.output.width() == 0 {
            return Err(Error::InvalidArch("output width must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::InvalidArch("hidden widths must be positive".into()));
        }
        if self.output.categorical_blocks.contains(&0) {
            return Err(Error::InvalidArch("categorical blocks must be non-empty".into()));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each affine layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input_dim()];
        widths.extend(&self.hidden);
        widths.push(self.output.width());
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn num_params(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| (i + 1) * o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Affine layer `out = act(W in + b)` with `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorParams {
    arch: Architecture,
    layers: Vec<Layer>,
}

impl GeneratorParams {
    /// Checks that the layer shapes chain from the input to the output width.
    pub fn from_parts(arch: Architecture, layers: Vec<Layer>) -> Result<Self> {
        arch.validate()?;
        let shapes = arch.layer_shapes();
        if shapes.len() != layers.len() {
            return Err(Error::InvalidArch(format!("expected {} layers, got {}", shapes.len(), layers.len())));
        }
        for (k, ((fan_in, fan_out), layer)) in shapes.iter().zip(&layers).enumerate() {
            if layer.weights.dim() != (*fan_out, *fan_in) || layer.bias.len() != *fan_out {
                return Err(Error::InvalidArch(format!("layer {k} has the wrong shape")));
            }
        }
        Ok(Self { arch, layers })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.arch.num_params()
    }

    /// Parameters flattened layer by layer: weights row-major, then bias.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.bias.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch { expected: self.num_params(), found: flat.len() });
        }
        let mut it = flat.iter();
        for l in &mut self.layers {
            for w in l.weights.iter_mut() {
                *w = *it.next().expect("length checked");
            }
            for b in l.bias.iter_mut() {
                *b = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

/// He initialization: weights `Normal(0, 2 / fan_in)`, zero biases.
pub fn init_generator(arch: &Architecture, seed: u64) -> Result<GeneratorParams> {
    arch.validate()?;
    let mut rng = rng::seeded(seed, rng::stream::INIT);
    let shapes = arch.layer_shapes();
    let last = shapes.len() - 1;
    let layers = shapes
        .iter()
        .enumerate()
        .map(|(k, &(fan_in, fan_out))| {
            let std = (2.0 / fan_in as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || {
                let n: f64 = rng.sample(StandardNormal);
                std * n
            });
            let activation = if k == last { Activation::Identity } else { Activation::Relu };
            Layer { weights, bias: Array1::zeros(fan_out), activation }
        })
        .collect();
    GeneratorParams::from_parts(arch.clone(), layers)
}

/// Latent codes, labels and (optionally) Gumbel noise for one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub latent: Array2<f64>,
    pub labels: Vec<usize>,
    /// Gumbel noise added to categorical logits, `n x categorical_width`.
    pub gumbel: Option<Array2<f64>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Draws `n` latent rows from `N(0, I)` and labels from `draw_label`.
    pub fn sample<R: Rng, F: FnMut(&mut R) -> usize>(
        arch: &Architecture,
        n: usize,
        gumbel: bool,
        rng: &mut R,
        mut draw_label: F,
    ) -> Self {
        let mut labels = Vec::with_capacity(n);
        let mut latent = Array2::zeros((n, arch.latent_dim));
        for i in 0..n {
            labels.push(draw_label(rng));
            for v in latent.row_mut(i) {
                *v = rng.sample(StandardNormal);
            }
        }
        let gumbel = gumbel.then(|| {
            Array2::from_shape_simple_fn((n, arch.output.categorical_width()), || {
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                -(-u.ln()).ln()
            })
        });
        Self { latent, labels, gumbel }
    }

    fn check(&self, arch: &Architecture) -> Result<()> {
        if self.latent.dim() != (self.labels.len(), arch.latent_dim) {
            return Err(Error::ShapeMismatch(format!(
                "latent batch {:?} for {} labels and latent dimension {}",
                self.latent.dim(),
                self.labels.len(),
                arch.latent_dim
            )));
        }
        if let Some(&label) = self.labels.iter().find(|&&y| y >= arch.num_classes) {
            return Err(Error::LabelOutOfRange { label, num_classes: arch.num_classes });
        }
        if let Some(g) = &self.gumbel {
            if g.dim() != (self.labels.len(), arch.output.categorical_width()) {
                return Err(Error::ShapeMismatch("gumbel noise has the wrong shape".into()));
            }
        }
        Ok(())
    }
}

/// Intermediate values kept for the backward pass.
pub(crate) struct ForwardCache {
    /// Input to each layer.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Array2<f64>>,
    /// Squashed output.
    pub output: Array2<f64>,
}

pub(crate) fn forward_cached(params: &GeneratorParams, batch: &Batch) -> Result<ForwardCache> {
    let arch = &params.arch;
    batch.check(arch)?;
    let n = batch.len();
    let mut x = Array2::zeros((n, arch.input_dim()));
    x.slice_mut(s![.., ..arch.latent_dim]).assign(&batch.latent);
    for (i, &y) in batch.labels.iter().enumerate() {
        x[[i, arch.latent_dim + y]] = 1.0;
    }
    let mut inputs = Vec::with_capacity(params.layers.len());
    let mut pre = Vec::with_capacity(params.layers.len());
    for layer in &params.layers {
        let z = x.dot(&layer.weights.t()) + &layer.bias;
        let next = z.mapv(|v| layer.activation.apply(v));
        inputs.push(std::mem::replace(&mut x, next));
        pre.push(z);
    }
    squash(&mut x, &arch.output, batch.gumbel.as_ref().map(|g| g.view()));
    Ok(ForwardCache { inputs, pre, output: x })
}

/// Logistic on numerical columns and a softmax per categorical block,
/// optionally on Gumbel-perturbed logits at [`GUMBEL_TEMPERATURE`].
fn squash(logits: &mut Array2<f64>, spec: &OutputSpec, gumbel: Option<ArrayView2<f64>>) {
    let d_num = spec.num_numerical;
    logits.slice_mut(s![.., ..d_num]).mapv_inplace(|v| 1.0 / (1.0 + (-v).exp()));
    for (i, mut row) in logits.axis_iter_mut(Axis(0)).enumerate() {
        let mut offset = d_num;
        for &width in &spec.categorical_blocks {
            let mut block = row.slice_mut(s![offset..offset + width]);
            if let Some(g) = &gumbel {
                let noise = g.slice(s![i, offset - d_num..offset - d_num + width]);
                block.zip_mut_with(&noise, |v, &e| *v = (*v + e) / GUMBEL_TEMPERATURE);
            }
            let top = block.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            block.mapv_inplace(|v| (v - top).exp());
            let total = block.sum();
            block.mapv_inplace(|v| v / total);
            offset += width;
        }
    }
}

/// Soft generator outputs, `n x output_width`.
pub fn forward(params: &GeneratorParams, batch: &Batch) -> Result<Array2<f64>> {
    Ok(forward_cached(params, batch)?.output)
}
