//! Error type shared by every analysis stage.

use std::path::PathBuf;

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T, E = TalaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum TalaError {
    #[error("cannot read audio file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported WAV encoding in {path}: {reason}")]
    UnsupportedEncoding { path: PathBuf, reason: String },

    #[error("invalid audio clip: {0}")]
    InvalidClip(String),

    #[error("invalid filterbank specification: {0}")]
    InvalidBankSpec(String),

    #[error("expected a clip sampled at {expected} Hz, got {actual} Hz")]
    WrongSampleRate { expected: u32, actual: u32 },

    #[error("clip is {duration_s:.3} s long, at least {min_s} s is required")]
    ClipTooShort { duration_s: f64, min_s: f64 },

    #[error("no candidate peaks in the bayan band")]
    EmptyPeakSet,

    #[error("need at least 3 bayan strokes to form a pulse-count pair, found {found}")]
    InsufficientBayanStrokes { found: usize },

    #[error("pulse-count series has {len} entries, at least 2 are required")]
    SeriesTooShort { len: usize },

    #[error("co-occurrence matrix is empty")]
    EmptyMatrix,

    #[error("no consecutive interval pair matches ({0}, {1})")]
    NoMatchingPairs(u8, u8),

    #[error("invalid theka definition: {0}")]
    InvalidTheka(String),

    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl TalaError {
    /// Short stable identifier, used as the warning/error code in reports.
    pub fn code(&self) -> &'static str {
        match self {
            TalaError::UnreadableFile { .. } => "UnreadableFile",
            TalaError::UnsupportedEncoding { .. } => "UnsupportedEncoding",
            TalaError::InvalidClip(_) => "InvalidClip",
            TalaError::InvalidBankSpec(_) => "InvalidBankSpec",
            TalaError::WrongSampleRate { .. } => "WrongSampleRate",
            TalaError::ClipTooShort { .. } => "ClipTooShort",
            TalaError::EmptyPeakSet => "EmptyPeakSet",
            TalaError::InsufficientBayanStrokes { .. } => "InsufficientBayanStrokes",
            TalaError::SeriesTooShort { .. } => "SeriesTooShort",
            TalaError::EmptyMatrix => "EmptyMatrix",
            TalaError::NoMatchingPairs(..) => "NoMatchingPairs",
            TalaError::InvalidTheka(_) => "InvalidTheka",
            TalaError::InvalidSpec(_) => "InvalidSpec",
            TalaError::MalformedManifest(_) => "MalformedManifest",
            TalaError::Io { .. } => "Io",
            TalaError::Json(_) => "Json",
        }
    }

    /// True for failures caused by the file system or a broken container,
    /// as opposed to analysis outcomes.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            TalaError::UnreadableFile { .. } | TalaError::UnsupportedEncoding { .. } | TalaError::Io { .. }
        )
    }
}
