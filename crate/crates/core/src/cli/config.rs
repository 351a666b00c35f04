//! Run configuration: a sectioned `key = value` file whose values can be
//! overridden by command-line flags of the same (kebab-case) name.
//!
//! ```text
//! [data]
//! data = train.csv
//! schema = adult.schema
//!
//! [privacy]
//! epsilon = 1.0
//! ```
//!
//! Sections only group keys; a key means the same thing in any section.
//! Later lines override earlier ones, and flags override the file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// What is released and how labels are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Features only, one release, unconditional generator.
    Unlabeled,
    /// Labeled embedding, one release, uniform generated labels.
    Balanced,
    /// Labeled embedding plus class counts, reweighted columns and
    /// count-proportional generated labels.
    Imbalanced,
    /// As imbalanced, on data with categorical columns.
    Hetero,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Unlabeled => "unlabeled",
            Mode::Balanced => "balanced",
            Mode::Imbalanced => "imbalanced",
            Mode::Hetero => "hetero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "unlabeled" => Some(Mode::Unlabeled),
            "balanced" => Some(Mode::Balanced),
            "imbalanced" => Some(Mode::Imbalanced),
            "hetero" => Some(Mode::Hetero),
            _ => None,
        }
    }

    pub fn num_releases(self) -> u32 {
        match self {
            Mode::Unlabeled | Mode::Balanced => 1,
            Mode::Imbalanced | Mode::Hetero => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // [data]
    pub data: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub undersample: f64,
    // [privacy]
    pub epsilon: f64,
    pub delta: f64,
    pub noise_seed: u64,
    // [features]
    pub num_features: usize,
    pub bandwidth: f64,
    pub median_heuristic: bool,
    pub max_pairs: usize,
    pub map_seed: u64,
    // [generator]
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub gumbel: bool,
    pub init_seed: u64,
    // [train]
    pub mode: Mode,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub train_seed: u64,
    pub subsample_seed: u64,
    // [output]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            schema: None,
            undersample: 1.0,
            epsilon: 1.0,
            delta: 1e-5,
            noise_seed: 1,
            num_features: 1000,
            bandwidth: 0.2,
            median_heuristic: false,
            max_pairs: crate::featuremap::DEFAULT_MAX_PAIRS,
            map_seed: 0,
            latent_dim: 10,
            hidden: vec![100, 100],
            gumbel: false,
            init_seed: 3,
            mode: Mode::Balanced,
            steps: 2000,
            batch_size: 500,
            learning_rate: 1e-2,
            train_seed: 2,
            subsample_seed: 4,
            out_dir: PathBuf::from("run"),
        }
    }
}

/// Every key with its section and documentation, in echo order.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("data", "data", "training CSV"),
    ("data", "schema", "schema file for the training CSV"),
    ("data", "undersample", "keep this fraction of the majority class, in (0, 1] (default 1)"),
    ("privacy", "epsilon", "target epsilon (default 1)"),
    ("privacy", "delta", "target delta in (0, 1) (default 1e-5)"),
    ("privacy", "noise_seed", "seed of the Gaussian mechanism noise (default 1)"),
    ("features", "num_features", "number of random features D, even (default 1000)"),
    ("features", "bandwidth", "Gaussian kernel bandwidth in normalized units (default 0.2)"),
    ("features", "median_heuristic", "derive the bandwidth from the data, not privatized (default false)"),
    ("features", "max_pairs", "pairs sampled by the median heuristic (default 10000)"),
    ("features", "map_seed", "seed of the random frequencies (default 0)"),
    ("generator", "latent_dim", "latent dimension (default 10)"),
    ("generator", "hidden", "comma-separated hidden widths, empty for linear (default 100,100)"),
    ("generator", "gumbel", "Gumbel-softmax categorical outputs while training (default false)"),
    ("generator", "init_seed", "seed of the generator initialization (default 3)"),
    ("train", "mode", "unlabeled | balanced | imbalanced | hetero (default balanced)"),
    ("train", "steps", "optimizer steps (default 2000)"),
    ("train", "batch_size", "synthetic samples per step (default 500)"),
    ("train", "learning_rate", "Adam learning rate (default 0.01)"),
    ("train", "train_seed", "seed of latent and label draws during training (default 2)"),
    ("train", "subsample_seed", "seed of majority-class undersampling (default 4)"),
    ("output", "out_dir", "output directory (default run)"),
];

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse '{value}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidConfig(format!("{key}: expected true or false, got '{value}'"))),
    }
}

impl RunConfig {
    /// Sets one field from its textual value. Keys may use `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "data" => self.data = Some(PathBuf::from(v)),
            "schema" => self.schema = Some(PathBuf::from(v)),
            "undersample" => self.undersample = parse_num(&key, v)?,
            "epsilon" => self.epsilon = parse_num(&key, v)?,
            "delta" => self.delta = parse_num(&key, v)?,
            "noise_seed" => self.noise_seed = parse_num(&key, v)?,
            "num_features" => self.num_features = parse_num(&key, v)?,
            "bandwidth" => self.bandwidth = parse_num(&key, v)?,
            "median_heuristic" => self.median_heuristic = parse_bool(&key, v)?,
            "max_pairs" => self.max_pairs = parse_num(&key, v)?,
            "map_seed" => self.map_seed = parse_num(&key, v)?,
            "latent_dim" => self.latent_dim = parse_num(&key, v)?,
            "hidden" => {
                self.hidden = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num(&key, s))
                    .collect::<Result<_>>()?
            }
            "gumbel" => self.gumbel = parse_bool(&key, v)?,
            "init_seed" => self.init_seed = parse_num(&key, v)?,
            "mode" => {
                self.mode = Mode::parse(v).ok_or_else(|| Error::InvalidConfig(format!("mode: unknown mode '{v}'")))?
            }
            "steps" => self.steps = parse_num(&key, v)?,
            "batch_size" => self.batch_size = parse_num(&key, v)?,
            "learning_rate" => self.learning_rate = parse_num(&key, v)?,
            "train_seed" => self.train_seed = parse_num(&key, v)?,
            "subsample_seed" => self.subsample_seed = parse_num(&key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::InvalidConfig(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return Err(Error::Parse { line: i as u64 + 1, message: format!("bad section header '{line}'") });
                }
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: i as u64 + 1, message: format!("expected 'key = value', got '{line}'") })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn value_of(&self, key: &str) -> String {
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        match key {
            "data" => path(&self.data),
            "schema" => path(&self.schema),
            "undersample" => format!("{:?}", self.undersample),
            "epsilon" => format!("{:?}", self.epsilon),
            "delta" => format!("{:?}", self.delta),
            "noise_seed" => self.noise_seed.to_string(),
            "num_features" => self.num_features.to_string(),
            "bandwidth" => format!("{:?}", self.bandwidth),
            "median_heuristic" => self.median_heuristic.to_string(),
            "max_pairs" => self.max_pairs.to_string(),
            "map_seed" => self.map_seed.to_string(),
            "latent_dim" => self.latent_dim.to_string(),
            "hidden" => self.hidden.iter().map(ToString::to_string).collect::<Vec<_>>().join(","),
            "gumbel" => self.gumbel.to_string(),
            "init_seed" => self.init_seed.to_string(),
            "mode" => self.mode.as_str().to_string(),
            "steps" => self.steps.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "learning_rate" => format!("{:?}", self.learning_rate),
            "train_seed" => self.train_seed.to_string(),
            "subsample_seed" => self.subsample_seed.to_string(),
            "out_dir" => self.out_dir.display().to_string(),
            _ => unreachable!("KEYS lists only known keys"),
        }
    }

    /// Full configuration in the file format; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for &(sec, key, doc) in KEYS {
            if sec != section {
                if !section.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{sec}]");
                section = sec;
            }
            let _ = writeln!(out, "# {doc}");
            let value = self.value_of(key);
            if value.is_empty() && matches!(key, "data" | "schema") {
                let _ = writeln!(out, "# {key} =");
            } else {
                let _ = writeln!(out, "{key} = {value}");
            }
        }
        out
    }

    /// Checks every field; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, why: String| Err(Error::InvalidConfig(format!("{key}: {why}")));
        if self.data.is_none() {
            return bad("data", "no training CSV given".into());
        }
        if self.schema.is_none() {
            return bad("schema", "no schema file given".into());
        }
        if !(self.undersample > 0.0 && self.undersample <= 1.0) {
            return bad("undersample", format!("must lie in (0, 1], got {}", self.undersample));
        }
        crate::privacy::PrivacyBudget::new(self.epsilon, self.delta, self.mode.num_releases())?;
        if self.num_features < 2 || !self.num_features.is_multiple_of(2) {
            return bad("num_features", format!("must be even and at least 2, got {}", self.num_features));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return bad("bandwidth", format!("must be positive, got {}", self.bandwidth));
        }
        if self.max_pairs == 0 {
            return bad("max_pairs", "must be at least 1".into());
        }
        if self.latent_dim == 0 {
            return bad("latent_dim", "must be at least 1".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden", "widths must be positive".into());
        }
        if self.steps == 0 {
            return bad("steps", "must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("must be positive, got {}", self.learning_rate));
        }
        Ok(())
    }
}
