use std::path::PathBuf;

use thiserror::Error;

use crate::learners::TrainTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions {rows}x{cols}: {reason}")]
    InvalidDimensions {
        rows: usize,
        cols: usize,
        reason: &'static str,
    },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular value decomposition did not converge for {rows}x{cols} matrix")]
    SvdNonConvergence { rows: usize, cols: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dictionary has {count} degenerate atoms but only {available} usable samples")]
    TooManyDegenerateAtoms { count: usize, available: usize },

    #[error("dictionary column {0} has zero norm")]
    ZeroAtom(usize),

    #[error("least-squares subsystem is numerically singular on support {support:?}")]
    SingularSupport { support: Vec<usize> },

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("combined code matrix is all zero")]
    DegenerateCodes,

    #[error("dictionary update increased the residual: {before} -> {after}")]
    DescentViolation { before: f64, after: f64 },

    #[error("training failed at iteration {iteration} ({} records kept): {source}", trace.records.len())]
    Training {
        iteration: usize,
        trace: TrainTrace,
        #[source]
        source: Box<Error>,
    },

    #[error("unsupported image format {0:?}, only binary P5 is read")]
    UnsupportedFormat(String),

    #[error("unsupported maxval {0}, expected 255")]
    UnsupportedMaxval(u32),

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated data: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("patch side {side} exceeds image {width}x{height}")]
    PatchTooLarge {
        side: usize,
        width: usize,
        height: usize,
    },

    #[error(
        "patches do not cover the image (side {side}, stride {stride}, image {width}x{height})"
    )]
    CoverageGap {
        side: usize,
        stride: usize,
        width: usize,
        height: usize,
    },

    #[error("negative mse {0}")]
    NegativeMse(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_sample(self, index: usize) -> Self {
        Error::Sample {
            index,
            source: Box::new(self),
        }
    }
}
