//! Downstream utility of synthetic data: classifiers trained on one dataset
//! and scored on real held-out data, plus mixture mode coverage.

use std::fmt;

use ndarray::{Array1, Array2, Axis};

use crate::data::{Dataset, GridMixture};
use crate::embedding::LabeledPoint;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    LogReg,
    NearestCentroid,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::LogReg => "logreg",
            ClassifierKind::NearestCentroid => "nearest_centroid",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "logreg" => Some(ClassifierKind::LogReg),
            "nearest_centroid" => Some(ClassifierKind::NearestCentroid),
            _ => None,
        }
    }
}

/// One metric value, printed as a `key=value` record.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: &'static str,
    pub value: f64,
    pub classifier: Option<ClassifierKind>,
    pub seed: u64,
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "metric={} value={:.6}", self.metric, self.value)?;
        if let Some(c) = self.classifier {
            write!(f, " classifier={}", c.as_str())?;
        }
        write!(f, " seed={}", self.seed)
    }
}

fn design_matrix(rows: &[LabeledPoint]) -> Array2<f64> {
    let width = rows.first().map_or(0, |r| r.x_num.len() + r.x_cat.len());
    let mut x = Array2::zeros((rows.len(), width));
    for (mut out, r) in x.axis_iter_mut(Axis(0)).zip(rows) {
        for (o, v) in out.iter_mut().zip(r.x_num.iter().chain(&r.x_cat)) {
            *o = *v;
        }
    }
    x
}

/// Multinomial logistic regression fit by full-batch gradient descent.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    weights: Array2<f64>,
    bias: Array1<f64>,
}

impl LogisticRegression {
    pub const ITERATIONS: usize = 2000;
    pub const LEARNING_RATE: f64 = 0.1;
    pub const L2: f64 = 1e-4;

    pub fn fit(x: &Array2<f64>, labels: &[usize], num_classes: usize) -> Self {
        let (n, p) = x.dim();
        let mut weights = Array2::zeros((num_classes, p));
        let mut bias = Array1::zeros(num_classes);
        let mut onehot = Array2::zeros((n, num_classes));
        for (i, &y) in labels.iter().enumerate() {
            onehot[[i, y]] = 1.0;
        }
        let inv_n = 1.0 / n as f64;
        for _ in 0..Self::ITERATIONS {
            let model = Self { weights, bias };
            let resid = model.predict_proba(x) - &onehot;
            let Self { weights: mut w, bias: mut b } = model;
            let grad_w = resid.t().dot(x) * inv_n + &(&w * Self::L2);
            let grad_b = resid.sum_axis(Axis(0)) * inv_n;
            w.scaled_add(-Self::LEARNING_RATE, &grad_w);
            b.scaled_add(-Self::LEARNING_RATE, &grad_b);
            weights = w;
            bias = b;
        }
        Self { weights, bias }
    }

    pub fn predict_proba(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut logits = x.dot(&self.weights.t()) + &self.bias;
        for mut row in logits.axis_iter_mut(Axis(0)) {
            let top = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - top).exp());
            let total = row.sum();
            row.mapv_inplace(|v| v / total);
        }
        logits
    }
}

/// Classifies by the closest per-class mean.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid {
    centroids: Array2<f64>,
    present: Vec<bool>,
}

impl NearestCentroid {
    pub fn fit(x: &Array2<f64>, labels: &[usize], num_classes: usize) -> Self {
        let mut centroids = Array2::zeros((num_classes, x.ncols()));
        let mut counts = vec![0usize; num_classes];
        for (row, &y) in x.axis_iter(Axis(0)).zip(labels) {
            let mut c = centroids.row_mut(y);
            c += &row;
            counts[y] += 1;
        }
        for (mut c, &n) in centroids.axis_iter_mut(Axis(0)).zip(&counts) {
            if n > 0 {
                c /= n as f64;
            }
        }
        Self { centroids, present: counts.iter().map(|&n| n > 0).collect() }
    }

    /// Negative squared distance to each centroid; absent classes score
    /// negative infinity.
    pub fn scores(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((x.nrows(), self.centroids.nrows()));
        for (mut o, row) in out.axis_iter_mut(Axis(0)).zip(x.axis_iter(Axis(0))) {
            for (c, centroid) in self.centroids.axis_iter(Axis(0)).enumerate() {
                o[c] = if self.present[c] {
                    -row.iter().zip(centroid.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
                } else {
                    f64::NEG_INFINITY
                };
            }
        }
        out
    }
}

fn row_argmax(scores: &Array2<f64>) -> Vec<usize> {
    scores.axis_iter(Axis(0)).map(|r| crate::data::argmax(r.as_slice().expect("standard layout"))).collect()
}

/// Fits `kind` on `train` and scores it on `test`: ROC-AUC of the class-1
/// score for binary labels, accuracy and macro F1 otherwise.
pub fn train_eval_classifier(train: &Dataset, test: &Dataset, kind: ClassifierKind, seed: u64) -> Result<Vec<EvalReport>> {
    if !train.schema().is_compatible(test.schema()) {
        return Err(Error::SchemaMismatch("train and test schemas differ".into()));
    }
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let classes = train.num_classes();
    if train.class_counts().iter().filter(|&&n| n > 0).count() < 2 {
        return Err(Error::SingleClassTrain);
    }
    let x_train = design_matrix(train.rows());
    let y_train: Vec<usize> = train.rows().iter().map(|r| r.y).collect();
    let x_test = design_matrix(test.rows());
    let y_test: Vec<usize> = test.rows().iter().map(|r| r.y).collect();
    let scores = match kind {
        ClassifierKind::LogReg => LogisticRegression::fit(&x_train, &y_train, classes).predict_proba(&x_test),
        ClassifierKind::NearestCentroid => NearestCentroid::fit(&x_train, &y_train, classes).scores(&x_test),
    };
    let report = |metric, value| EvalReport { metric, value, classifier: Some(kind), seed };
    if classes == 2 {
        let positive: Vec<f64> = match kind {
            ClassifierKind::LogReg => scores.column(1).to_vec(),
            // closer to class 1 than class 0 means a higher score
            ClassifierKind::NearestCentroid => scores.axis_iter(Axis(0)).map(|r| r[1] - r[0]).collect(),
        };
        let labels: Vec<bool> = y_test.iter().map(|&y| y == 1).collect();
        Ok(vec![report("roc_auc", roc_auc(&positive, &labels)?)])
    } else {
        let pred = row_argmax(&scores);
        Ok(vec![report("accuracy", accuracy(&pred, &y_test)), report("macro_f1", macro_f1(&pred, &y_test, classes))])
    }
}

/// Mann-Whitney estimate of `P(score_pos > score_neg)`, ties counting one
/// half.
pub fn roc_auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), found: positive.len() });
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateData("ROC-AUC needs both positive and negative examples".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1..=j+1 share their average
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> f64 {
    pred.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// Unweighted mean of per-class F1 over classes present in either vector.
pub fn macro_f1(pred: &[usize], truth: &[usize], num_classes: usize) -> f64 {
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fneg = vec![0usize; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fneg[t] += 1;
        }
    }
    let scores: Vec<f64> = (0..num_classes)
        .filter(|&c| tp[c] + fp[c] + fneg[c] > 0)
        .map(|c| 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fneg[c]) as f64)
        .collect();
    scores.iter().sum::<f64>() / scores.len().max(1) as f64
}

/// Minimum labeled samples near a mean for its mode to count as covered.
pub const COVERAGE_MIN_SAMPLES: usize = 10;
/// Coverage radius in component standard deviations.
pub const COVERAGE_RADIUS: f64 = 3.0;

/// Fraction of mixture components with at least [`COVERAGE_MIN_SAMPLES`]
/// samples of the component's class within [`COVERAGE_RADIUS`] standard
/// deviations of its mean. Points are in original units.
pub fn mode_coverage(samples: &[LabeledPoint], mixture: &GridMixture) -> f64 {
    mode_coverage_with(samples, mixture, COVERAGE_MIN_SAMPLES, COVERAGE_RADIUS)
}

pub fn mode_coverage_with(samples: &[LabeledPoint], mixture: &GridMixture, min_samples: usize, radius: f64) -> f64 {
    let r2 = (radius * mixture.std).powi(2);
    let covered = (0..mixture.num_components())
        .filter(|&j| {
            let m = mixture.mean(j);
            let class = mixture.class_of(j);
            samples
                .iter()
                .filter(|p| p.y == class && p.x_num.len() >= 2)
                .filter(|p| (p.x_num[0] - m[0]).powi(2) + (p.x_num[1] - m[1]).powi(2) <= r2)
                .take(min_samples)
                .count()
                >= min_samples
        })
        .count();
    covered as f64 / mixture.num_components() as f64
}
