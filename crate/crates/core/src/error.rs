use std::path::PathBuf;

use crate::pose_model::Canvas;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input document. `path` is a JSON path or file location.
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("pose document contains no people")]
    EmptyPose,

    #[error("empty sequence: {0}")]
    EmptySequence(String),

    #[error("invalid pose{}{}: {message}", frame.map(|f| format!(" in frame {f}")).unwrap_or_default(), joint.as_ref().map(|j| format!(" at {j}")).unwrap_or_default())]
    Validation {
        frame: Option<usize>,
        joint: Option<String>,
        message: String,
    },

    #[error("canvas mismatch: expected {expected}, frames {frames:?} differ")]
    MixedCanvas {
        expected: Canvas,
        frames: Vec<usize>,
    },

    #[error("edge {edge} ({parent}->{child}) has a missing endpoint")]
    MissingJoint {
        edge: usize,
        parent: usize,
        child: usize,
    },

    #[error("unusable reference pose: {0}")]
    UnusableReference(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("frame {frame}: {source}")]
    Frame {
        frame: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("generator adapter `{name}` failed: {message} (manifest: {manifest})")]
    Adapter {
        name: String,
        message: String,
        manifest: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for failures of the filesystem or image encoder rather than of the input data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } | Error::Image { .. } => true,
            Error::Frame { source, .. } => source.is_io(),
            _ => false,
        }
    }
}
