use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("cannot decode label raster {path}: {message}")]
    Raster { path: PathBuf, message: String },

    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("duplicate image id {0:?}")]
    DuplicateImage(String),

    #[error("image {image_id:?} contains label id {label} (num_classes = {num_classes}, ignore_id = {ignore_id})")]
    LabelOutOfRange {
        image_id: String,
        label: u32,
        num_classes: u32,
        ignore_id: u32,
    },

    #[error("image {image_id:?}: manifest says {expected_width}x{expected_height}, raster is {width}x{height}")]
    DimensionMismatch {
        image_id: String,
        expected_width: u32,
        expected_height: u32,
        width: u32,
        height: u32,
    },

    #[error("image {image_id:?}: class pixel counts sum to {counted}, more than the {area} pixels in the image")]
    PixelCountOverflow {
        image_id: String,
        counted: u64,
        area: u64,
    },

    #[error("unknown image id {0:?}")]
    UnknownImage(String),

    #[error("keep set is empty")]
    EmptyKeepSet,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("unreachable target gini {target}: must be below (C-1)/C = {bound}")]
    UnreachableTarget { target: f64, bound: f64 },

    #[error("target gini {target} does not exceed the current gini {current}")]
    TargetNotAboveCurrent { target: f64, current: f64 },

    #[error("{n} targets cannot be matched to {m} queries")]
    TooManyTargets { n: usize, m: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("undefined mIoU: no class in scope has a defined IoU")]
    UndefinedMiou,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("usage: {0}")]
    Usage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Process exit status the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnreachableTarget { .. } | Error::TargetNotAboveCurrent { .. } => 4,
            Error::Usage(_) => 2,
            _ => 3,
        }
    }
}
