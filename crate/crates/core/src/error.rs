use thiserror::Error;

pub type Result<T> = std::result::Result<T, CtgiError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtgiError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("frame count mismatch: expected K = {expected}, got {actual}")]
    FrameCountMismatch { expected: usize, actual: usize },

    #[error("invalid intensity at frame {frame}, pixel ({row}, {col}): {value}")]
    InvalidIntensity {
        frame: usize,
        row: usize,
        col: usize,
        value: f64,
    },

    #[error("empty video")]
    EmptyVideo,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Hadamard order {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("degenerate pattern at k = {k} (1-based frame {frame}): {reason}")]
    DegeneratePattern { k: usize, frame: usize, reason: String },

    #[error("more than one constant tile (k = {0:?}); the DC frame cannot be recovered")]
    MultipleDcPatterns(Vec<usize>),

    #[error("measurement system has rank {rank} < K = {k}; use the compressive (cs) mode")]
    RankDeficient { rank: usize, k: usize },

    #[error("incompatible mode: {0}")]
    IncompatibleMode(String),

    #[error("solver produced a non-finite value at iteration {iteration}")]
    SolverDiverged { iteration: usize },

    #[error("super-pixel ({row}, {col}): {source}")]
    AtSuperPixel {
        row: usize,
        col: usize,
        #[source]
        source: Box<CtgiError>,
    },

    #[error("basis decode: {0}")]
    Decode(String),
}
