use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing file: {0}")]
    MissingFile(PathBuf),

    #[error("sequence too short: {0} frame(s), need at least 2")]
    SequenceTooShort(usize),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("unsupported bit depth: {0}")]
    UnsupportedDepth(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("expected 66 points for frame {frame}, found {found}")]
    LandmarkCount { frame: usize, found: usize },

    #[error("non-contiguous landmark frames: expected frame {expected}, found {found}")]
    NonContiguousFrames { expected: usize, found: usize },

    #[error("singular landmark configuration (zero spread)")]
    SingularConfiguration,

    #[error("too many pyramid levels ({levels}) for a {width}x{height} frame")]
    TooManyLevels {
        levels: usize,
        width: usize,
        height: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("single-class input: ROC needs both positive and negative labels")]
    SingleClass,

    #[error("frame {index}")]
    AtFrame {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_frame(self, index: usize) -> Self {
        Error::AtFrame {
            index,
            source: Box::new(self),
        }
    }

    /// Frame index attached to this error, if any.
    pub fn frame_index(&self) -> Option<usize> {
        match self {
            Error::AtFrame { index, .. } => Some(*index),
            _ => None,
        }
    }
}

pub(crate) trait ResultExt<T> {
    fn at_frame(self, index: usize) -> Result<T>;
}

impl<T> ResultExt<T> for Result<T> {
    fn at_frame(self, index: usize) -> Result<T> {
        self.map_err(|e| e.at_frame(index))
    }
}
