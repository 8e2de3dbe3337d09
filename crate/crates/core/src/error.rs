use std::fmt;
use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// A caller violated an operation precondition.
    InvalidArgument(String),
    /// A file could not be parsed; carries path context and, where it makes
    /// sense, a byte offset.
    Parse { path: PathBuf, message: String },
    /// Underlying I/O failure with path context.
    Io { path: PathBuf, source: std::io::Error },
    /// RANSAC found no valid plane (all sampled triples degenerate).
    NoPlane,
    /// The mixed edge map selected zero edge points; the frame cannot be
    /// optimized.
    NoEdges,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn parse(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), message: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Parse { path, message } => {
                write!(f, "failed to parse {}: {message}", path.display())
            }
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::NoPlane => write!(f, "plane segmentation failed: no valid plane found"),
            Error::NoEdges => write!(f, "no edge points selected; frame cannot be calibrated"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}
