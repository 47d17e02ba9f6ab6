//! Crate-wide error and result types.

use std::path::PathBuf;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The file could not be opened or read at all.
    #[error("unreadable file {path}: {source}")]
    UnreadableFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The image header is not a well-formed P5 PGM header.
    #[error("malformed header in {path}: {detail}")]
    MalformedHeader { path: PathBuf, detail: String },

    /// The pixel payload ends before `width * height` bytes.
    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    TruncatedPayload {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    /// The image stores more than 8 bits per sample.
    #[error("unsupported bit depth in {path}: {detail}")]
    UnsupportedBitDepth { path: PathBuf, detail: String },

    /// The file is neither a P5 PGM nor a PNG the decoder accepts.
    #[error("unsupported image format in {path}: {detail}")]
    UnsupportedFormat { path: PathBuf, detail: String },

    /// Requested more clusters than there are distinct intensity values.
    #[error("degenerate clustering: {clusters} clusters requested but only {distinct} distinct intensities present")]
    DegenerateClustering { clusters: usize, distinct: usize },

    /// Normalized cross-correlation denominator is zero at this position.
    #[error("undefined correlation at ({u}, {v}): zero variance under the template")]
    UndefinedCorrelation { u: u32, v: u32 },

    /// Every candidate position left the correlation undefined.
    #[error("no valid match: correlation undefined at every position")]
    NoValidMatch,

    /// Contrast is undefined for an all-zero image.
    #[error("zero mean intensity: contrast is undefined")]
    ZeroMeanIntensity,

    /// The labeled image set is too small for the requested classification.
    #[error("insufficient class support: {}", deficits.join("; "))]
    InsufficientClassSupport { deficits: Vec<String> },

    /// Train and test sets carry different feature sets.
    #[error("feature set mismatch: train has {train}, test has {test}")]
    SetKindMismatch { train: String, test: String },

    /// Classification was asked to run on an empty test set.
    #[error("empty test set")]
    EmptyTestSet,

    /// Cosine distance is undefined for a zero vector.
    #[error("zero vector: cosine distance is undefined")]
    ZeroVector,

    /// A caller-supplied parameter violates a documented precondition.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A CSV file could not be read or written.
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    /// A JSON document could not be read or written.
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Plain I/O failure outside of image decoding.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
