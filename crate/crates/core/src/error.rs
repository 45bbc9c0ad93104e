use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, NeptuneError>;

#[derive(Debug, Error)]
pub enum NeptuneError {
    #[error("path does not exist: {0}")]
    MissingPath(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unreadable frame: {reason}")]
    BadFrame { path: PathBuf, reason: String },

    #[error("{path}: frame is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    MixedDimensions {
        path: PathBuf,
        want_w: u32,
        want_h: u32,
        got_w: u32,
        got_h: u32,
    },

    #[error("no frames found in {0}")]
    NoFrames(PathBuf),

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("crop rectangle ({x0},{y0}) {w}x{h} exceeds {width}x{height} image")]
    CropOutOfBounds {
        x0: u32,
        y0: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },

    #[error("need {needed} frames for one window, have {available}")]
    TooFewFrames { needed: usize, available: usize },

    #[error("window length must be 1..=5 seconds, got {0}")]
    BadWindowLength(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("series of length {0} is too short for a spectrum (need at least 2)")]
    SeriesTooShort(usize),

    #[error("degenerate input: {distinct} distinct values for {k} clusters")]
    DegenerateInput { distinct: usize, k: usize },

    #[error("empty segment list")]
    NoSegments,

    #[error("no pairing possible: the 4-cluster segment set is empty")]
    NoPairing,

    #[error("need at least 4 feature vectors for percentiles, have {0}")]
    TooFewVectors(usize),

    #[error("dataset has no positive rows")]
    NoPositives,

    #[error("antecedent size {size} out of range 1..={max}")]
    BadAntecedentSize { size: usize, max: usize },

    #[error("every sweep entry is empty; no rule set reaches confidence 1")]
    EmptySweep,

    #[error("zero variance; correlation undefined")]
    ZeroVariance,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid labels file: {0}")]
    Labels(String),

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("model/config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl NeptuneError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NeptuneError::Io {
            path: path.into(),
            source,
        }
    }
}
