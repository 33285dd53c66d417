//! Error types shared across the toolkit.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parse failure at a specific 1-based line of the input text.
    #[error("line {line}: {kind}")]
    Parse { line: usize, kind: ParseErrorKind },

    /// An error attributed to a specific file.
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    /// Invalid configuration or arguments supplied by the caller.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// An external candidate evaluator violated its protocol.
    #[error("evaluator: {0}")]
    Evaluator(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_file(path: impl Into<PathBuf>, source: Error) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(source),
        }
    }

    pub fn parse(line: usize, kind: ParseErrorKind) -> Self {
        Error::Parse { line, kind }
    }

    /// True when the error is the caller's fault (bad input file or flags),
    /// as opposed to an internal failure. The CLI maps this to exit code 2.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Config(_) => true,
            Error::InFile { source, .. } => source.is_usage(),
            Error::Io(e) => e.kind() == std::io::ErrorKind::NotFound,
            Error::Evaluator(_) => false,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParseErrorKind {
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },

    #[error("field {field} ({name}): invalid number {value:?}")]
    Number {
        field: usize,
        name: &'static str,
        value: String,
    },

    #[error("video id {0} outside 1..100")]
    VideoId(i64),

    #[error("frame number {0} must be >= 1")]
    FrameNumber(i64),

    #[error("track id {0} must be >= 0")]
    TrackId(i64),

    #[error("class id {0} outside 1..7")]
    ClassId(i64),

    #[error("non-positive box size {width} x {height}")]
    NonPositiveSize { width: f64, height: f64 },

    #[error("negative box origin ({left}, {top})")]
    NegativeOrigin { left: f64, top: f64 },

    #[error(
        "box ({left}, {top}, {width}, {height}) exceeds the {frame_width}x{frame_height} frame"
    )]
    OutOfFrame {
        left: f64,
        top: f64,
        width: f64,
        height: f64,
        frame_width: u32,
        frame_height: u32,
    },

    #[error("confidence {0} outside [0, 1]")]
    Confidence(f64),

    #[error("similarity {0} outside [0, 1]")]
    Similarity(f64),

    #[error("{0}")]
    Other(String),
}
