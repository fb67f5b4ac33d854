use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rotation angle at or beyond the log branch cut (>= pi - 1e-6)")]
    AngleAtBranchCut,
    #[error("twist rotation magnitude {0} outside the principal branch (must be < pi)")]
    TwistOutOfRange(f64),
    #[error("parameter vector length {got} does not match shape descriptor (expected {want})")]
    ShapeMismatch { got: usize, want: usize },
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("image dimensions differ ({0}x{1} vs {2}x{3})")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("non-finite gradient in parameter group `{0}`")]
    NonFiniteGradient(&'static str),
    #[error("image {0}x{1} is smaller than the ssim window")]
    ImageTooSmall(usize, usize),
    #[error("invalid pose matrix: {0}")]
    InvalidPose(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("png: {0}")]
    Png(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
