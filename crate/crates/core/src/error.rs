use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("state became non-finite at t = {time}")]
    NonFiniteState { time: f64 },

    #[error("loss became non-finite ({value})")]
    NonFiniteLoss { value: f64 },

    #[error("criterion produced a non-finite score in tensor {tensor} at index {index}")]
    NonFiniteScore { tensor: usize, index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pruning would empty layer {layer}")]
    EmptyLayer { layer: usize },

    #[error("rewind policy {0} requires a stored checkpoint")]
    MissingCheckpoint(&'static str),

    #[error("sign ledgers are not comparable: {0}")]
    LedgerMismatch(String),

    #[error("bad magic number {found:#010x} in {path} (expected {expected:#010x})")]
    BadMagic {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("file {path} is truncated: needed {needed} bytes, found {found}")]
    TruncatedFile {
        path: PathBuf,
        needed: usize,
        found: usize,
    },

    #[error("{images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFiniteState { .. } => "non_finite_state",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::NonFiniteScore { .. } => "non_finite_score",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::Config(_) => "config",
            Error::EmptyLayer { .. } => "empty_layer",
            Error::MissingCheckpoint(_) => "missing_checkpoint",
            Error::LedgerMismatch(_) => "ledger_mismatch",
            Error::BadMagic { .. } => "bad_magic",
            Error::TruncatedFile { .. } => "truncated_file",
            Error::CountMismatch { .. } => "count_mismatch",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::ShapeMismatch(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
