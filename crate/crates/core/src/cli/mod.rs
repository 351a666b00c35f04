//! Command-line front end.
//!
//! Subcommands: `make-gaussians`, `calibrate`, `train`, `sample`,
//! `evaluate`, `bound`. Exit codes: 0 success, 2 invalid configuration or
//! input, 3 unsatisfiable privacy budget, 4 unsupported model-file version,
//! 1 anything else.

mod config;
mod pipeline;

pub use config::{Mode, RunConfig, KEYS};
pub use pipeline::{cmd_train, run_train, write_outputs, Observer, PipelineEvent, TrainSummary};

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::data::{load_tabular, load_tabular_with, make_gaussian_grid_with, nll, write_csv, GridMixture, Schema};
use crate::error::{Error, Result};
use crate::eval::{mode_coverage, train_eval_classifier, ClassifierKind, EvalReport};
use crate::generator::{sample, Model};
use crate::privacy::{alpha_grid, calibrate_sigma, error_bound, PrivacyBudget, ALPHA_GRID_LEN};

#[derive(Debug, Parser)]
#[command(name = "dpmerf", version, about = "Differentially private synthetic data from random-feature mean embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the 5x5 Gaussian-grid benchmark as train/test CSVs plus schema.
    MakeGaussians(MakeGaussiansArgs),
    /// Print the noise multiplier for a privacy budget.
    Calibrate(CalibrateArgs),
    /// Release the embedding and train a generator on it.
    Train(TrainArgs),
    /// Draw synthetic records from a trained model.
    Sample(SampleArgs),
    /// Score classifiers trained on one CSV against another.
    Evaluate(EvaluateArgs),
    /// Print the worst-case error bound of the noisy random-feature MMD.
    Bound(BoundArgs),
}

#[derive(Debug, Args)]
pub struct MakeGaussiansArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4000)]
    pub samples_per_component: usize,
    #[arg(long, default_value_t = 1.0)]
    pub spacing: f64,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1)]
    pub releases: u32,
}

/// Every flag overrides the key of the same name in `--config`.
#[derive(Debug, Args, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<String>,
    #[arg(long)]
    pub schema: Option<String>,
    #[arg(long)]
    pub undersample: Option<String>,
    #[arg(long)]
    pub epsilon: Option<String>,
    #[arg(long)]
    pub delta: Option<String>,
    #[arg(long)]
    pub noise_seed: Option<String>,
    #[arg(long)]
    pub num_features: Option<String>,
    #[arg(long)]
    pub bandwidth: Option<String>,
    #[arg(long)]
    pub median_heuristic: Option<String>,
    #[arg(long)]
    pub max_pairs: Option<String>,
    #[arg(long)]
    pub map_seed: Option<String>,
    #[arg(long)]
    pub latent_dim: Option<String>,
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub gumbel: Option<String>,
    #[arg(long)]
    pub init_seed: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub batch_size: Option<String>,
    #[arg(long)]
    pub learning_rate: Option<String>,
    #[arg(long)]
    pub train_seed: Option<String>,
    #[arg(long)]
    pub subsample_seed: Option<String>,
    #[arg(long)]
    pub out_dir: Option<String>,
}

impl TrainArgs {
    /// File values (if any) with flag overrides applied.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let overrides = [
            ("data", &self.data),
            ("schema", &self.schema),
            ("undersample", &self.undersample),
            ("epsilon", &self.epsilon),
            ("delta", &self.delta),
            ("noise_seed", &self.noise_seed),
            ("num_features", &self.num_features),
            ("bandwidth", &self.bandwidth),
            ("median_heuristic", &self.median_heuristic),
            ("max_pairs", &self.max_pairs),
            ("map_seed", &self.map_seed),
            ("latent_dim", &self.latent_dim),
            ("hidden", &self.hidden),
            ("gumbel", &self.gumbel),
            ("init_seed", &self.init_seed),
            ("mode", &self.mode),
            ("steps", &self.steps),
            ("batch_size", &self.batch_size),
            ("learning_rate", &self.learning_rate),
            ("train_seed", &self.train_seed),
            ("subsample_seed", &self.subsample_seed),
            ("out_dir", &self.out_dir),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                cfg.set(key, v)?;
            }
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub num_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV the classifiers are fit on (typically synthetic).
    #[arg(long)]
    pub train: PathBuf,
    /// Real held-out CSV.
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Schema of the test CSV when it differs from `--schema`.
    #[arg(long)]
    pub test_schema: Option<PathBuf>,
    /// logreg, nearest_centroid or all.
    #[arg(long, default_value = "all")]
    pub classifier: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report NLL and mode coverage of `--train` under the default grid.
    #[arg(long)]
    pub grid: bool,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub num_features: usize,
    #[arg(long)]
    pub num_samples: usize,
    #[arg(long)]
    pub sigma: f64,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Unsatisfiable { .. } => 3,
        Error::VersionMismatch { .. } => 4,
        Error::DivergedLoss { .. } => 1,
        _ => 2,
    }
}

pub fn cmd_make_gaussians(args: &MakeGaussiansArgs) -> Result<String> {
    if args.samples_per_component == 0 {
        return Err(Error::InvalidConfig("samples_per_component: must be at least 1".into()));
    }
    if !(args.spacing > 0.0 && args.spacing.is_finite()) {
        return Err(Error::InvalidConfig(format!("spacing: must be positive, got {}", args.spacing)));
    }
    let mixture = GridMixture { spacing: args.spacing, samples_per_component: args.samples_per_component, ..GridMixture::default() };
    let (train, test, _) = make_gaussian_grid_with(mixture, args.seed);
    std::fs::create_dir_all(&args.out_dir)?;
    write_csv(&train, &args.out_dir.join("train.csv"))?;
    write_csv(&test, &args.out_dir.join("test.csv"))?;
    train.schema().write_file(&args.out_dir.join("grid.schema"))?;
    Ok(format!("train={} test={} dir={}\n", train.len(), test.len(), args.out_dir.display()))
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<String> {
    let budget = PrivacyBudget::new(args.epsilon, args.delta, args.releases)?;
    let c = calibrate_sigma(&budget)?;
    let grid = alpha_grid();
    Ok(format!(
        "sigma={:.6}\nepsilon_achieved={:.6}\nalpha={:.4}\nreleases={}\ngrid=log-spaced n={} min={} max={}\n",
        c.sigma,
        c.epsilon,
        c.alpha,
        args.releases,
        ALPHA_GRID_LEN,
        grid[0],
        grid[grid.len() - 1]
    ))
}

pub fn cmd_sample(args: &SampleArgs) -> Result<String> {
    let model = Model::load(&args.model)?;
    let ds = sample(&model.params, args.num_samples, &model.label_dist, args.seed, &model.schema)?;
    write_csv(&ds, &args.out)?;
    Ok(format!("samples={} out={}\n", ds.len(), args.out.display()))
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let kinds = match args.classifier.as_str() {
        "all" => vec![ClassifierKind::LogReg, ClassifierKind::NearestCentroid],
        s => vec![ClassifierKind::parse(s).ok_or_else(|| Error::InvalidConfig(format!("classifier: unknown '{s}'")))?],
    };
    let train = load_tabular(&args.train, &args.schema)?;
    if let Some(ts) = &args.test_schema {
        if !Schema::from_file(ts)?.is_compatible(train.schema()) {
            return Err(Error::SchemaMismatch(format!("{} does not match {}", ts.display(), args.schema.display())));
        }
    }
    let test = load_tabular_with(&args.test, train.schema())?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for kind in kinds {
        reports.extend(train_eval_classifier(&train, &test, kind, args.seed)?);
    }
    if args.grid {
        let mixture = GridMixture::default();
        let points = train.raw_points();
        reports.push(EvalReport { metric: "nll", value: nll(&points, &mixture)?, classifier: None, seed: args.seed });
        reports.push(EvalReport {
            metric: "mode_coverage",
            value: mode_coverage(&points, &mixture),
            classifier: None,
            seed: args.seed,
        });
    }
    Ok(reports.iter().map(|r| format!("{r}\n")).collect())
}

pub fn cmd_bound(args: &BoundArgs) -> Result<String> {
    Ok(format!("bound={:.6}\n", error_bound(args.num_features, args.num_samples, args.sigma)?))
}

fn dispatch(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::MakeGaussians(a) => cmd_make_gaussians(a),
        Command::Calibrate(a) => cmd_calibrate(a),
        Command::Train(a) => {
            let cfg = a.resolve()?;
            let summary = cmd_train(&cfg, &mut |_: &PipelineEvent| {})?;
            Ok(format!("{}model={}\n", summary.report, cfg.out_dir.join("model.bin").display()))
        }
        Command::Sample(a) => cmd_sample(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bound(a) => cmd_bound(a),
    }
}

/// Parses arguments, runs the command, prints its output and returns the
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
