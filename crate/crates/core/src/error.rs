use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty subsequence")]
    EmptySubsequence,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("window exceeds series: m = {m}, length = {len}")]
    WindowExceedsSeries { m: usize, len: usize },

    #[error("window length must be at least 1")]
    ZeroWindow,

    #[error("series too short for self-join: length {len} < 2 * m = {}", 2 * m)]
    SeriesTooShortForSelfJoin { m: usize, len: usize },

    #[error("percentile {0} outside (0, 100)")]
    InvalidPercentile(f64),

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("empty input")]
    EmptyInput,

    #[error("invalid clustering parameter: {0}")]
    InvalidClusteringParameter(String),

    #[error("uninitialized detector: pattern store has no clusters")]
    UninitializedDetector,

    #[error("unknown pattern id {0}")]
    UnknownCluster(usize),

    #[error("unsupported pattern store version {found} (expected {expected})")]
    StoreVersion { found: u32, expected: u32 },

    #[error("invalid pattern store: {0}")]
    InvalidStore(String),

    #[error("{path}:{line}: {message}")]
    Csv {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
