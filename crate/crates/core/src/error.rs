use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // similarity
    #[error("zero-norm embedding: cosine similarity is undefined")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("empty embedding")]
    EmptyEmbedding,
    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },
    #[error("empty vocabulary")]
    EmptyVocabulary,
    #[error("empty score vector")]
    EmptyScores,

    // vocabulary
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("task `{task_id}`: {message}")]
    Validation { task_id: String, message: String },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("category `{category}` does not belong to task `{task_id}`")]
    ForeignCategory { task_id: String, category: String },
    #[error("task `{task_id}` is a {actual} task, expected {expected}")]
    WrongTaskKind {
        task_id: String,
        expected: &'static str,
        actual: &'static str,
    },

    // embedding store
    #[error("bad magic bytes {0:?}, expected \"ZSBA\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("truncated file: needed {needed} bytes at offset {offset}, {available} available")]
    TruncatedFile {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after the last record")]
    TrailingBytes(usize),
    #[error("duplicate key `{0}`")]
    DuplicateKey(String),
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("missing key `{0}`")]
    MissingKey(String),

    // masks
    #[error("mask `{mask_id}`: RLE covers {found} pixels, image has {expected}")]
    RleLengthMismatch { mask_id: String, expected: u64, found: u64 },
    #[error("mask `{mask_id}`: non-canonical RLE ({reason})")]
    NonCanonicalRle { mask_id: String, reason: String },
    #[error("masks `{first}` and `{second}` overlap at pixel (x={x}, y={y})")]
    OverlappingMasks {
        first: String,
        second: String,
        x: usize,
        y: usize,
    },
    #[error("mask `{0}` has no set pixels")]
    EmptyMask(String),
    #[error("duplicate mask id `{0}`")]
    DuplicateMaskId(String),
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },

    // segmentation
    #[error("{rows} score rows for {masks} masks")]
    RowCountMismatch { rows: usize, masks: usize },
    #[error("{0} categories exceed the 255-label limit of 8-bit segmentation maps")]
    TooManyCategories(usize),
    #[error("netpbm: {0}")]
    Netpbm(String),

    // metrics
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: {left} predictions vs {right} ground truths")]
    LengthMismatch { left: usize, right: usize },
    #[error("result for unknown sample `{0}`")]
    UnknownSample(String),
    #[error("no samples with ground truth to evaluate")]
    EmptyDataset,
    #[error("label {label} out of range for {categories} categories")]
    LabelOutOfRange { label: usize, categories: usize },
    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, err: &serde_json::Error) -> Self {
        Error::Parse {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// Process exit status for a fatal occurrence of this error:
    /// 2 for I/O and format problems, 3 for validation problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Json(_)
            | Error::Parse { .. }
            | Error::BadMagic(_)
            | Error::BadVersion(_)
            | Error::TruncatedFile { .. }
            | Error::TrailingBytes(_)
            | Error::InvalidKey(_)
            | Error::RleLengthMismatch { .. }
            | Error::NonCanonicalRle { .. }
            | Error::Netpbm(_)
            | Error::EmptyEmbedding
            | Error::NonFinite { .. }
            | Error::DimensionMismatch { .. } => 2,
            _ => 3,
        }
    }
}
