use std::path::PathBuf;

/// Errors raised anywhere in the fusion workbench.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("negative score component {value} at task {task}")]
    NegativeScore { task: usize, value: f64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("action enumeration needs {required} combinations, cap is {cap}")]
    EnumerationCap { required: u128, cap: u128 },
    #[error("invalid parameter {name} = {value}: expected {expected}")]
    InvalidParameter {
        name: String,
        value: String,
        expected: String,
    },
    #[error("bin index {index} out of range for task {task} with {bins} bins")]
    BinOutOfRange {
        task: usize,
        index: usize,
        bins: usize,
    },
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("invalid permutation of {0} candidates")]
    InvalidPermutation(usize),
    #[error("total confidence weight is zero")]
    ZeroConfidence,
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error("checkpoint format: {0}")]
    Checkpoint(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(
        name: impl Into<String>,
        value: impl std::fmt::Display,
        expected: impl Into<String>,
    ) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            value: value.to_string(),
            expected: expected.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
