use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("schema violation at line {line}: {message}")]
    SchemaViolation { line: u64, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("missing config section [{0}]")]
    MissingSection(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("no ranking signal: every group has constant labels")]
    NoRankingSignal,
    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("too many active features for enumeration: {0} (limit {limit})", limit = crate::explain::MAX_BRUTE_FORCE_FEATURES)]
    TooManyFeatures(usize),
    #[error("node {node} of tree {tree} has zero cover")]
    ZeroCover { tree: usize, node: usize },
    #[error("mismatched candidate sets")]
    MismatchedCandidates,
    #[error("model format error: {0}")]
    ModelFormat(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable short code used in machine-readable CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::SchemaViolation { .. } => "schema_violation",
            Error::SchemaMismatch(_) => "schema_mismatch",
            Error::InvalidDataset(_) => "invalid_dataset",
            Error::Domain(_) => "domain",
            Error::InvalidConfig(_) => "invalid_config",
            Error::MissingSection(_) => "missing_section",
            Error::EmptyDataset => "empty_dataset",
            Error::NoRankingSignal => "no_ranking_signal",
            Error::InsufficientSamples { .. } => "insufficient_samples",
            Error::TooManyFeatures(_) => "too_many_features",
            Error::ZeroCover { .. } => "zero_cover",
            Error::MismatchedCandidates => "mismatched_candidates",
            Error::ModelFormat(_) => "model_format",
        }
    }
}
