use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },

    #[error("categorical entry {value} is not binary")]
    NonBinaryCategorical { value: f64 },

    #[error("invalid Renyi order {0}; must exceed 1")]
    InvalidOrder(f64),

    #[error("empty order grid")]
    EmptyGrid,

    #[error("invalid noise multiplier {0}")]
    InvalidSigma(f64),

    #[error("privacy budget unsatisfiable: epsilon {achieved:.6} at the largest noise multiplier {sigma_cap} still exceeds target {target}")]
    Unsatisfiable { target: f64, achieved: f64, sigma_cap: f64 },

    #[error("invalid generator architecture: {0}")]
    InvalidArch(String),

    #[error("loss became non-finite at step {step}")]
    DivergedLoss { step: usize },

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("training set contains a single class")]
    SingleClassTrain,

    #[error("model file version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed model file: {0}")]
    MalformedModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
