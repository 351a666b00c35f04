//! Random-feature MMD between a released embedding and a generated batch,
//! with its gradient by reverse-mode propagation.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};

use super::{Batch, GeneratorParams, GUMBEL_TEMPERATURE};
use crate::embedding::EmbeddingKind;
use crate::error::{Error, Result};
use crate::featuremap::FeatureMap;
use crate::privacy::EmbeddingRelease;

/// Per-sample weight in the synthetic embedding. Unweighted targets use
/// `1/n`; weighted (class-conditional) targets use `1/n_c` so each column is
/// a per-class mean.
fn sample_weights(labels: &[usize], num_classes: usize, weighted: bool) -> Vec<f64> {
    let n = labels.len() as f64;
    if !weighted {
        return vec![1.0 / n; labels.len()];
    }
    let mut counts = vec![0usize; num_classes];
    for &y in labels {
        counts[y] += 1;
    }
    labels.iter().map(|&y| 1.0 / counts[y] as f64).collect()
}

fn check_compat(params: &GeneratorParams, map: &FeatureMap, kind: EmbeddingKind) -> Result<()> {
    let arch = params.arch();
    let d_cat = arch.output.categorical_width();
    if map.input_dim() != arch.output.num_numerical {
        return Err(Error::ShapeMismatch(format!(
            "feature map takes {} inputs, generator emits {} numerical columns",
            map.input_dim(),
            arch.output.num_numerical
        )));
    }
    let ok = match kind {
        EmbeddingKind::Unlabeled => arch.num_classes == 1 && d_cat == 0,
        EmbeddingKind::Labeled => d_cat == 0,
        EmbeddingKind::HeteroLabeled => d_cat > 0,
    };
    if !ok {
        return Err(Error::ShapeMismatch(format!("generator layout does not fit a {} embedding", kind.as_str())));
    }
    Ok(())
}

struct Phases {
    cos: Array2<f64>,
    sin: Array2<f64>,
}

fn phases(output: ArrayView2<f64>, num_numerical: usize, map: &FeatureMap) -> Phases {
    let a = output.slice(s![.., ..num_numerical]).dot(&map.frequencies().t());
    let mut cos = Array2::zeros(a.raw_dim());
    let mut sin = Array2::zeros(a.raw_dim());
    ndarray::Zip::from(&a).and(&mut cos).and(&mut sin).for_each(|&v, c, s| {
        let (sv, cv) = v.sin_cos();
        *c = cv;
        *s = sv;
    });
    Phases { cos, sin }
}

/// `C x D_eff` synthetic embedding (transposed for contiguous class rows).
fn embed_transposed(
    output: ArrayView2<f64>,
    ph: &Phases,
    labels: &[usize],
    weights: &[f64],
    num_numerical: usize,
    num_classes: usize,
    map: &FeatureMap,
) -> Array2<f64> {
    let half = map.num_features() / 2;
    let d_cat = output.ncols() - num_numerical;
    let scale = map.scale();
    let cat_scale = if d_cat > 0 { 1.0 / (d_cat as f64).sqrt() } else { 0.0 };
    let mut q = Array2::zeros((num_classes, 2 * half + d_cat));
    for (i, (&y, &w)) in labels.iter().zip(weights).enumerate() {
        let mut row = q.row_mut(y);
        let row = row.as_slice_mut().expect("standard layout");
        let (cos, sin) = (ph.cos.row(i), ph.sin.row(i));
        let ws = w * scale;
        for j in 0..half {
            row[j] += ws * cos[j];
            row[half + j] += ws * sin[j];
        }
        let wc = w * cat_scale;
        for k in 0..d_cat {
            row[2 * half + k] += wc * output[[i, num_numerical + k]];
        }
    }
    q
}

/// The `D_eff x C` embedding of a generated batch, using soft categorical
/// outputs. Must match the layout of the release it is compared against.
pub fn synthetic_embedding(
    params: &GeneratorParams,
    map: &FeatureMap,
    batch: &Batch,
    kind: EmbeddingKind,
    weighted: bool,
) -> Result<Array2<f64>> {
    check_compat(params, map, kind)?;
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let arch = params.arch();
    let out = super::forward(params, batch)?;
    let ph = phases(out.view(), arch.output.num_numerical, map);
    let weights = sample_weights(&batch.labels, arch.num_classes, weighted);
    let q = embed_transposed(out.view(), &ph, &batch.labels, &weights, arch.output.num_numerical, arch.num_classes, map);
    Ok(q.reversed_axes().as_standard_layout().into_owned())
}

/// `||release - Q||_F^2` for the batch embedding `Q`, and its gradient with
/// respect to the flattened parameters (layout of
/// [`GeneratorParams::to_flat`]). The release is a constant.
pub fn loss_and_grad(
    params: &GeneratorParams,
    release: &EmbeddingRelease,
    map: &FeatureMap,
    batch: &Batch,
) -> Result<(f64, Vec<f64>)> {
    check_compat(params, map, release.kind())?;
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let arch = params.arch();
    let d_num = arch.output.num_numerical;
    let d_cat = arch.output.categorical_width();
    let classes = arch.num_classes;
    let target = release.values();
    if target.dim() != (map.num_features() + d_cat, classes) {
        return Err(Error::ShapeMismatch(format!(
            "release is {:?}, generator embedding would be {:?}",
            target.dim(),
            (map.num_features() + d_cat, classes)
        )));
    }

    let cache = super::forward_cached(params, batch)?;
    let out = cache.output.view();
    let ph = phases(out, d_num, map);
    let weights = sample_weights(&batch.labels, classes, release.weighted());
    let q = embed_transposed(out, &ph, &batch.labels, &weights, d_num, classes, map);
    let diff = &target.t() - &q;
    let loss = diff.iter().map(|v| v * v).sum::<f64>();

    // dL/dQ = -2 diff; sample i sees column y_i scaled by its weight.
    let half = map.num_features() / 2;
    let n = batch.len();
    let scale = map.scale();
    let mut v = Array2::zeros((n, half));
    let mut d_out = Array2::zeros(out.raw_dim());
    let cat_scale = if d_cat > 0 { 1.0 / (d_cat as f64).sqrt() } else { 0.0 };
    for (i, (&y, &w)) in batch.labels.iter().zip(&weights).enumerate() {
        let g = diff.row(y);
        let g = g.as_slice().expect("standard layout");
        let coef = -2.0 * w;
        let (cos, sin) = (ph.cos.row(i), ph.sin.row(i));
        let mut vrow = v.row_mut(i);
        for j in 0..half {
            vrow[j] = coef * scale * (-g[j] * sin[j] + g[half + j] * cos[j]);
        }
        for k in 0..d_cat {
            d_out[[i, d_num + k]] = coef * cat_scale * g[2 * half + k];
        }
    }
    let d_num_grad = v.dot(&map.frequencies());
    d_out.slice_mut(s![.., ..d_num]).assign(&d_num_grad);

    let mut delta = squash_backward(out, d_out, arch.output.num_numerical, &arch.output.categorical_blocks, batch.gumbel.is_some());

    let layers = params.layers();
    let mut grads: Vec<(Array2<f64>, Array1<f64>)> = Vec::with_capacity(layers.len());
    for k in (0..layers.len()).rev() {
        let layer = &layers[k];
        ndarray::Zip::from(&mut delta).and(&cache.pre[k]).for_each(|d, &p| *d *= layer.activation.derivative(p));
        let dw = delta.t().dot(&cache.inputs[k]);
        let db = delta.sum_axis(Axis(0));
        if k > 0 {
            delta = delta.dot(&layer.weights);
        }
        grads.push((dw, db));
    }
    let mut flat = Vec::with_capacity(params.num_params());
    for (dw, db) in grads.iter().rev() {
        flat.extend(dw.iter());
        flat.extend(db.iter());
    }
    Ok((loss, flat))
}

/// Maps the gradient with respect to squashed outputs to the gradient with
/// respect to the logits.
fn squash_backward(
    out: ArrayView2<f64>,
    mut d_out: Array2<f64>,
    d_num: usize,
    blocks: &[usize],
    gumbel: bool,
) -> Array2<f64> {
    let inv_temp = if gumbel { 1.0 / GUMBEL_TEMPERATURE } else { 1.0 };
    for (mut drow, orow) in d_out.axis_iter_mut(Axis(0)).zip(out.axis_iter(Axis(0))) {
        for j in 0..d_num {
            drow[j] *= orow[j] * (1.0 - orow[j]);
        }
        let mut offset = d_num;
        for &w in blocks {
            let p = orow.slice(s![offset..offset + w]);
            let mut u = drow.slice_mut(s![offset..offset + w]);
            let dot: f64 = p.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
            ndarray::Zip::from(&mut u).and(&p).for_each(|ui, &pi| *ui = inv_temp * pi * (*ui - dot));
            offset += w;
        }
    }
    d_out
}
