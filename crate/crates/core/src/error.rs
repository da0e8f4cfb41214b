use std::path::PathBuf;

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("coefficients do not describe a quadric: {0}")]
    NotAQuadric(&'static str),

    #[error("quadric has no center (inconsistent center system)")]
    NoCenter,

    #[error("segment covariance rank too low for a {0} fit")]
    FitDegenerate(&'static str),

    #[error("no ground plane found")]
    NoGround,

    #[error("scene representation is empty")]
    EmptyScene,

    #[error("semantic labels differ ({0} vs {1})")]
    LabelMismatch(u32, u32),

    #[error("representations share no semantic label")]
    NoSharedSemantics,

    #[error("compatibility graph has {vertices} vertices, cap is {cap}")]
    GraphTooLarge { vertices: usize, cap: usize },

    #[error("need at least 3 correspondences, got {0}")]
    CorrespondenceDegenerate(usize),

    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(&'static str),

    #[error("registration failed: {0}")]
    RegistrationFailed(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
