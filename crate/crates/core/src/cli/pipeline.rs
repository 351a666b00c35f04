//! The training pipeline: release, then fit the generator to the release.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::data::{load_tabular, undersample, Dataset};
use crate::embedding::{labeled_mean_embedding, mean_embedding, EmbeddingKind};
use crate::error::{Error, Result};
use crate::featuremap::{median_heuristic_bandwidth, FeatureMap};
use crate::generator::{init_generator, train, Architecture, LabelSampling, Model, OutputSpec, ReleaseInfo, TrainConfig};
use crate::privacy::{
    calibrate_sigma, label_distribution, privatize_counts, privatize_embedding, reweight_embedding, PrivacyBudget,
};
use crate::rng::PRNG_NAME;

use super::config::{Mode, RunConfig};

/// Progress notifications from [`run_train`].
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineEvent {
    /// A file containing sensitive records was opened.
    DataRead(PathBuf),
    EmbeddingReleased,
    CountsReleased,
    /// All releases are done and the raw records have been dropped.
    ReleasesComplete,
    TrainingFinished,
}

pub trait Observer {
    fn event(&mut self, event: &PipelineEvent);
}

impl<F: FnMut(&PipelineEvent)> Observer for F {
    fn event(&mut self, event: &PipelineEvent) {
        self(event)
    }
}

/// What a finished training run produced.
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub model: Model,
    pub trace: Vec<f64>,
    pub bandwidth: f64,
    pub report: String,
}

/// Everything derived from the sensitive data. Nothing else about the
/// records survives the release stage.
struct Released {
    release: crate::privacy::EmbeddingRelease,
    label_dist: Vec<f64>,
    map: FeatureMap,
    schema: crate::data::Schema,
    sigma: f64,
    epsilon: f64,
    alpha: f64,
    num_samples: usize,
    count_sensitivity: Option<f64>,
}

fn load_sensitive(cfg: &RunConfig, observer: &mut dyn Observer) -> Result<Dataset> {
    let data = cfg.data.as_deref().expect("validated");
    let schema = cfg.schema.as_deref().expect("validated");
    observer.event(&PipelineEvent::DataRead(data.to_path_buf()));
    let ds = load_tabular(data, schema)?;
    if cfg.undersample < 1.0 {
        undersample(&ds, cfg.undersample, cfg.subsample_seed)
    } else {
        Ok(ds)
    }
}

fn release_stage(cfg: &RunConfig, observer: &mut dyn Observer) -> Result<Released> {
    let ds = load_sensitive(cfg, observer)?;
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let schema = ds.schema().clone();
    let d_cat = schema.categorical_width();
    match cfg.mode {
        Mode::Unlabeled if d_cat > 0 => {
            return Err(Error::InvalidConfig("mode: unlabeled mode needs numerical-only data".into()))
        }
        Mode::Hetero if d_cat == 0 => {
            return Err(Error::InvalidConfig("mode: hetero mode needs categorical columns".into()))
        }
        _ => {}
    }
    if schema.num_numerical() == 0 {
        return Err(Error::InvalidSchema("at least one numerical column is required".into()));
    }

    let budget = PrivacyBudget::new(cfg.epsilon, cfg.delta, cfg.mode.num_releases())?;
    if let Some(w) = budget.delta_warning(ds.len()) {
        log::warn!("{w}");
    }
    let calibration = calibrate_sigma(&budget)?;
    let sigma = calibration.sigma;

    let bandwidth = if cfg.median_heuristic {
        log::warn!("bandwidth from the median heuristic is computed on the raw data and is not privatized");
        median_heuristic_bandwidth(&ds.numerical_matrix(), cfg.max_pairs, cfg.map_seed)?
    } else {
        cfg.bandwidth
    };
    let map = FeatureMap::sample(schema.num_numerical(), cfg.num_features, bandwidth, cfg.map_seed)?;

    let emb = match cfg.mode {
        Mode::Unlabeled => mean_embedding(&ds.numerical_matrix(), &map)?,
        _ => labeled_mean_embedding(ds.rows(), &map, schema.num_classes())?,
    };
    let release = privatize_embedding(&emb, sigma, cfg.noise_seed)?.with_budget(budget);
    observer.event(&PipelineEvent::EmbeddingReleased);

    let (release, label_dist, count_sensitivity) = match cfg.mode {
        Mode::Unlabeled => (release, vec![1.0], None),
        Mode::Balanced => {
            let c = schema.num_classes();
            (release, vec![1.0 / c as f64; c], None)
        }
        Mode::Imbalanced | Mode::Hetero => {
            let counts = privatize_counts(&ds.class_counts(), sigma, cfg.noise_seed)?;
            observer.event(&PipelineEvent::CountsReleased);
            let weighted = reweight_embedding(&release, &counts)?;
            (weighted, label_distribution(&counts), Some(counts.spec().sensitivity))
        }
    };
    let num_samples = ds.len();
    drop(ds);
    Ok(Released {
        release,
        label_dist,
        map,
        schema,
        sigma,
        epsilon: calibration.epsilon,
        alpha: calibration.alpha,
        num_samples,
        count_sensitivity,
    })
}

/// Runs the full pipeline and returns the model without writing anything.
pub fn run_train(cfg: &RunConfig, observer: &mut dyn Observer) -> Result<TrainSummary> {
    cfg.validate()?;
    let rel = release_stage(cfg, observer)?;
    observer.event(&PipelineEvent::ReleasesComplete);

    let output = OutputSpec { num_numerical: rel.schema.num_numerical(), categorical_blocks: rel.schema.categorical_blocks() };
    let arch = Architecture {
        latent_dim: cfg.latent_dim,
        num_classes: rel.release.num_classes(),
        hidden: cfg.hidden.clone(),
        output,
    };
    let params = init_generator(&arch, cfg.init_seed)?;
    let labels = match cfg.mode {
        Mode::Imbalanced | Mode::Hetero => LabelSampling::Proportional(rel.label_dist.clone()),
        Mode::Unlabeled | Mode::Balanced => LabelSampling::Uniform,
    };
    let tc = TrainConfig {
        steps: cfg.steps,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        seed: cfg.train_seed,
        labels,
        gumbel: cfg.gumbel,
    };
    let outcome = train(params, &rel.release, &rel.map, &tc)?;
    observer.event(&PipelineEvent::TrainingFinished);

    let kind = rel.release.kind();
    let info = ReleaseInfo {
        mode: cfg.mode.as_str().into(),
        kind,
        num_samples: rel.num_samples as u64,
        sensitivity: rel.release.spec().sensitivity,
        sigma: rel.sigma,
        epsilon: rel.epsilon,
        target_epsilon: cfg.epsilon,
        delta: cfg.delta,
        alpha: rel.alpha,
        num_releases: cfg.mode.num_releases(),
        weighted: rel.release.weighted(),
        noise_seed: cfg.noise_seed,
        train_seed: cfg.train_seed,
        prng: PRNG_NAME.into(),
    };
    let bandwidth = rel.map.bandwidth();
    let model = Model { map: rel.map, schema: rel.schema, params: outcome.params, release: info, label_dist: rel.label_dist };
    let report = budget_report(&model, rel.count_sensitivity, &outcome.trace, kind);
    Ok(TrainSummary { model, trace: outcome.trace, bandwidth, report })
}

fn budget_report(model: &Model, count_sensitivity: Option<f64>, trace: &[f64], kind: EmbeddingKind) -> String {
    let r = &model.release;
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k}={v}");
    };
    kv("mode", r.mode.clone());
    kv("embedding_kind", kind.as_str().into());
    kv("num_samples", r.num_samples.to_string());
    kv("num_features", model.map.num_features().to_string());
    kv("bandwidth", format!("{:?}", model.map.bandwidth()));
    kv("num_releases", r.num_releases.to_string());
    kv("sigma", format!("{:.6}", r.sigma));
    kv("embedding_sensitivity", format!("{:e}", r.sensitivity));
    kv("embedding_noise_std", format!("{:e}", r.sensitivity * r.sigma));
    if let Some(s) = count_sensitivity {
        kv("count_sensitivity", format!("{s:.6}"));
        kv("count_noise_std", format!("{:.6}", s * r.sigma));
    }
    kv("epsilon_target", format!("{}", r.target_epsilon));
    kv("epsilon_spent", format!("{:.6}", r.epsilon));
    kv("delta", format!("{:e}", r.delta));
    kv("alpha", format!("{:.4}", r.alpha));
    kv("label_distribution", model.label_dist.iter().map(|p| format!("{p:.6}")).collect::<Vec<_>>().join(","));
    if let (Some(first), Some(last)) = (trace.first(), trace.last()) {
        kv("initial_loss", format!("{first:e}"));
        kv("final_loss", format!("{last:e}"));
    }
    out
}

/// Writes `config.echo`, `model.bin`, `trace.csv` and `report.txt` into
/// the configured output directory.
pub fn write_outputs(cfg: &RunConfig, summary: &TrainSummary) -> Result<PathBuf> {
    let dir = &cfg.out_dir;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.echo"), cfg.to_text())?;
    summary.model.save(&dir.join("model.bin"))?;
    let mut trace = String::from("step,loss\n");
    for (i, l) in summary.trace.iter().enumerate() {
        let _ = writeln!(trace, "{i},{l:e}");
    }
    std::fs::write(dir.join("trace.csv"), trace)?;
    std::fs::write(dir.join("report.txt"), &summary.report)?;
    Ok(dir.join("model.bin"))
}

/// `run_train` followed by `write_outputs`.
pub fn cmd_train(cfg: &RunConfig, observer: &mut dyn Observer) -> Result<TrainSummary> {
    let summary = run_train(cfg, observer)?;
    write_outputs(cfg, &summary)?;
    Ok(summary)
}
