use thiserror::Error;

/// Errors produced by the prediction, training and evaluation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("block size must be at least 1, got {0}")]
    InvalidBlockSize(usize),

    #[error("{size}x{size} block at ({row}, {col}) does not fit in a {width}x{height} image")]
    BlockOutOfBounds {
        row: usize,
        col: usize,
        size: usize,
        width: usize,
        height: usize,
    },

    #[error("no position in a {width}x{height} image has all references inside the image for block size {block_size}")]
    NoValidPosition {
        width: usize,
        height: usize,
        block_size: usize,
    },

    #[error("angle {0} outside [45, 225] degrees")]
    InvalidAngle(f64),

    #[error("unsupported angular mode count {0}, expected one of 5, 9, 13, 17, 21, 25, 29, 33")]
    UnsupportedModeCount(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("block size {dataset} of the dataset differs from block size {set} of the predictor set")]
    GeometryMismatch { dataset: usize, set: usize },

    #[error("dataset has no samples")]
    EmptyDataset,

    #[error("predictor set has no modes")]
    EmptyPredictorSet,

    #[error("regularization weight must be finite and non-negative, got {0}")]
    InvalidLambda(f64),

    #[error("iteration count must be at least 1")]
    InvalidIterations,

    #[error("normal equations are singular (pivot {pivot:e} at column {column}); use a positive lambda")]
    SingularSystem { column: usize, pivot: f64 },

    #[error("image is {width}x{height}, dimensions must be multiples of block size {block_size}")]
    DimensionNotMultiple {
        width: usize,
        height: usize,
        block_size: usize,
    },

    #[error("image is {width}x{height}, smaller than one {block_size}x{block_size} block")]
    ImageTooSmall {
        width: usize,
        height: usize,
        block_size: usize,
    },

    #[error("empty input")]
    EmptyInput,

    #[error("bad magic bytes in model file")]
    BadMagic,

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated model file")]
    Truncated,

    #[error("inconsistent model file: {0}")]
    InconsistentModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
