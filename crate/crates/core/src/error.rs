use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("recording too short to filter: {samples} samples, filter needs {needed}")]
    RecordingTooShort { samples: usize, needed: usize },

    #[error("input too short: {samples} samples, network needs at least {needed}")]
    InputTooShort { samples: usize, needed: usize },

    #[error("invalid sample rate {0} Hz")]
    InvalidSampleRate(f64),

    #[error("invalid batch request: {0}")]
    InvalidBatch(String),

    #[error("bite at {time_s} s lies outside the recording [0, {duration_s}] s")]
    BiteOutOfRange { time_s: f64, duration_s: f64 },

    #[error("non-finite timestamp {0}")]
    NonFiniteTime(f64),

    #[error("unpaired edge: detected {0} edges")]
    UnpairedEdge(usize),

    #[error("overlapping intervals: [{0}, {1}] and [{2}, {3}]")]
    OverlappingIntervals(f64, f64, f64, f64),

    #[error("invalid interval [{0}, {1}]: end must be greater than start")]
    InvalidInterval(f64, f64),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("bad header: {0}")]
    BadHeader(String),

    #[error("non-monotone timestamps at row {0}")]
    NonMonotoneTimestamps(usize),

    #[error("non-uniform timestamps at row {0}")]
    NonUniformTimestamps(usize),

    #[error("malformed row {0}")]
    MalformedRow(usize),

    #[error("malformed record on line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("unsorted records on line {0}")]
    UnsortedRecords(usize),

    #[error("bad magic: not a model parameter file")]
    BadMagic,

    #[error("version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u8, found: u8 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("truncated stream")]
    TruncatedStream,

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
