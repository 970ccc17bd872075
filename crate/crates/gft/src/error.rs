use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A data row that could not be parsed; `line` is the 1-based line
    /// number in the input file.
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("domain {domain:?}: feature dimension {found} does not match expected {expected}")]
    DimensionMismatch {
        domain: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: label {value:?} is not -1 or 1")]
    InvalidLabel { line: usize, value: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("covariance matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("weight vector sums to {sum}, expected 1 within {tolerance}")]
    WeightSum { sum: f64, tolerance: f64 },
    #[error("cost matrix contains a non-finite entry at ({row}, {col})")]
    NonFiniteCost { row: usize, col: usize },
    #[error("point clouds have {left} and {right} points; the exact solver requires equal sizes")]
    UnequalCloudSizes { left: usize, right: usize },
    #[error("{n} points exceeds the exact solver's limit of {limit}")]
    ExactSolverTooLarge { n: usize, limit: usize },
    #[error("domain {0:?} is missing from the provided sizes")]
    MissingSize(String),
    #[error("domain {0:?} is not present in the disparity matrix")]
    UnknownDomain(String),
    #[error(
        "nearest-neighbor routing hit a dead end at {at:?} with {unvisited} sources unvisited; \
         run it on the complete (unpruned) graph"
    )]
    NearestNeighborDeadEnd { at: String, unvisited: usize },
    #[error("no candidate paths to select from")]
    NoCandidatePaths,
    #[error(
        "exhaustive routing over {sources} sources needs a path-length cap (required above {limit})"
    )]
    ExhaustiveSearchTooLarge { sources: usize, limit: usize },
    #[error("total sample count along the path must be at least 2, got {0}")]
    PathTooSmall(u64),
    #[error("dataset {domain:?} has unlabeled samples where labels are required")]
    Unlabeled { domain: String },
    #[error("training loss became NaN during epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("cannot evaluate accuracy on an empty sample set")]
    EmptyEvaluation,
    #[error("{0}")]
    Serialization(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Serialization(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
