use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed row {row}: {message}")]
    Format {
        path: PathBuf,
        row: usize,
        message: String,
    },
    #[error("{path}: non-finite value at ({row}, {col})")]
    NonFinite { path: PathBuf, row: usize, col: usize },
    #[error("{path}: invalid JSON: {message}")]
    Json { path: PathBuf, message: String },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("normative population is degenerate for score '{score}': {reason}")]
    DegenerateNormative { score: String, reason: String },
    #[error("region '{region}' has zero temporal variance")]
    DegenerateRegion { region: String },
    #[error("correlation undefined: {0}")]
    DegenerateCorrelation(String),
    #[error("data rank {rank} is below the requested {requested} components")]
    Rank { rank: usize, requested: usize },
    #[error(
        "frequency band [{f_lo}, {f_hi}] Hz selects no DFT bin (resolution {resolution:.6} Hz)"
    )]
    Band { f_lo: f64, f_hi: f64, resolution: f64 },
    #[error("ROC needs both classes, got {positives} positive and {negatives} negative")]
    SingleClass { positives: usize, negatives: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("non-finite gradient in parameter '{param}' (element {index})")]
    Divergence { param: String, index: usize },
    #[error("backward pass needs saved intermediates; rerun the forward pass with saving enabled")]
    MissingIntermediates,
    #[error("missing model input: {0}")]
    MissingInput(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint parameter '{param}' has shape {found:?}, model expects {expected:?}")]
    ParamShape {
        param: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("class '{class}' has {available} subjects, {requested} shots requested")]
    Shots {
        class: String,
        available: usize,
        requested: usize,
    },
    #[error("fold {fold} (held-out '{subject}') failed: {source}")]
    Fold {
        fold: usize,
        subject: String,
        #[source]
        source: Box<Error>,
    },
    #[error("epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse error class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numeric,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Numeric(_)
            | Error::Divergence { .. }
            | Error::MissingIntermediates
            | Error::Domain(_) => ErrorClass::Numeric,
            Error::Invalid(_) => ErrorClass::Usage,
            Error::Fold { source, .. } | Error::Training { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format { .. } => "format",
            Error::NonFinite { .. } => "non_finite",
            Error::Json { .. } => "json",
            Error::Shape(_) => "shape",
            Error::Invalid(_) => "invalid",
            Error::DegenerateNormative { .. } => "degenerate_normative",
            Error::DegenerateRegion { .. } => "degenerate_region",
            Error::DegenerateCorrelation(_) => "degenerate_correlation",
            Error::Rank { .. } => "rank",
            Error::Band { .. } => "band",
            Error::SingleClass { .. } => "single_class",
            Error::Domain(_) => "domain",
            Error::Numeric(_) => "numeric",
            Error::Divergence { .. } => "divergence",
            Error::MissingIntermediates => "missing_intermediates",
            Error::MissingInput(_) => "missing_input",
            Error::Checkpoint(_) => "checkpoint",
            Error::ParamShape { .. } => "param_shape",
            Error::Shots { .. } => "shots",
            Error::Fold { .. } => "fold",
            Error::Training { .. } => "training",
        }
    }
}
