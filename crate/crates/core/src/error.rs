use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: not a RIFF/WAVE file ({reason})")]
    NotAWav { path: PathBuf, reason: String },
    #[error("{path}: unsupported encoding: {property}")]
    UnsupportedEncoding { path: PathBuf, property: String },
    #[error("{path}: truncated file ({detail})")]
    TruncatedFile { path: PathBuf, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sample rate mismatch: {left} Hz vs {right} Hz")]
    SampleRateMismatch { left: u32, right: u32 },
    #[error("zero-energy {which} signal")]
    ZeroEnergy { which: &'static str },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("clip too short: {len} samples, need at least {needed}")]
    ClipTooShort { len: usize, needed: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("channels not divisible: {0}")]
    IndivisibleChannels(String),
    #[error("degenerate batch: {0}")]
    DegenerateBatch(String),
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("score {0} outside (0, 1)")]
    ScoreOutOfRange(f64),
    #[error("input contains a single class; need both positives and negatives")]
    SingleClass,
    #[error("empty input: {0}")]
    Empty(String),
    #[error("checkpoint: bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("checkpoint: unsupported version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint truncated: {0}")]
    Truncated(String),
    #[error("checkpoint corrupt: {0}")]
    Corrupt(String),
    #[error("{path}:{line}: {message}")]
    ConfigParse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("dataset error: {0}")]
    Data(String),
    #[error("non-finite value during training: {0}")]
    NumericAbort(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
