use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header {path}: {reason}")]
    Header { path: PathBuf, reason: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimsMismatch { expected: String, found: String },
    #[error("label value {value} at index {index} is outside {{0, 1}}")]
    LabelDomain { index: usize, value: u32 },
    #[error("non-finite intensity at index {0}")]
    NonFinite(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training set contains a single class")]
    SingleClass,
    #[error("training set is empty")]
    EmptyInput,
    #[error("class {class} has {count} samples, at least {required} required")]
    TooFewSamples {
        class: u8,
        count: usize,
        required: usize,
    },
    #[error("probability {0} is outside [0, 1]")]
    Probability(f64),
    #[error("negative value {value} at index {index}")]
    Negative { index: usize, value: f64 },
    #[error("transition row {row} sums to {sum}, expected 1")]
    UnnormalizedRow { row: usize, sum: f64 },
    #[error("degenerate plane: |u x v| = {0:e}")]
    DegeneratePlane(f64),
    #[error("supervoxel {0} is already labeled")]
    AlreadyLabeled(usize),
    #[error("no unlabeled supervoxels remain")]
    NoneUnlabeled,
    #[error("{0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimsMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
