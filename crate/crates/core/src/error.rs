use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed WAV file: {0}")]
    MalformedWav(String),

    #[error("unsupported WAV format: {0}")]
    UnsupportedFormat(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest error at row {row}: {message}")]
    Manifest { row: usize, message: String },

    #[error("dialog {dialog_id} mixes spontaneity labels")]
    InconsistentDialog { dialog_id: String },

    #[error("bad configuration: {0}")]
    BadConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("non-finite value in input: {0}")]
    NonFinite(String),

    #[error("missing branch data for the {0} branch: need at least two emotion classes")]
    MissingBranchData(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("model file version {found} is not supported (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },

    #[error("corrupt model file: {0}")]
    CorruptFile(String),

    #[error("length mismatch: {left} predictions for {right} utterances")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("unknown descriptor group: {0}")]
    UnknownDescriptor(String),

    #[error("every feature track was excluded")]
    EmptyFeature,

    #[error("utterance {utterance_id}: {source}")]
    Utterance {
        utterance_id: String,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach an utterance id to an error raised while processing it.
    pub fn for_utterance(self, utterance_id: &str) -> Self {
        Error::Utterance {
            utterance_id: utterance_id.to_string(),
            source: Box::new(self),
        }
    }
}
