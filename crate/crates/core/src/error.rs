//! Error type shared by every module of the toolkit.

use thiserror::Error;

/// Toolkit-wide error enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Codec(#[from] image::ImageError),

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    TooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("operation requires a 3-channel image")]
    NeedsColor,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("sample {value} out of range [0,255]")]
    SampleOutOfRange { value: f64 },

    #[error("histogram is not normalized (sum = {sum})")]
    UnnormalizedHistogram { sum: f64 },

    #[error("kernel dimensions must be odd, got {width}x{height}")]
    EvenKernel { width: usize, height: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("solver did not converge within the iteration cap (duality gap {gap})")]
    NonConvergence { gap: f64 },

    #[error("model file parse error at byte {offset}: {message}")]
    ModelParse { offset: usize, message: String },

    #[error("unsupported model file version: {found:?}")]
    UnsupportedVersion { found: String },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown config key `{key}` at line {line}")]
    UnknownConfigKey { key: String, line: usize },

    #[error("training/evaluation overlap: {path} matches a training source hash")]
    TrainEvalOverlap { path: String },

    #[error("malformed input: {0}")]
    Malformed(String),
}

impl Error {
    /// Stable one-word class identifier, used by the CLI for
    /// machine-parsable error lines.
    pub fn class(&self) -> &'static str {
        match self {
            Error::Io(_) => "io",
            Error::Codec(_) => "codec",
            Error::UnsupportedImage(_) => "unsupported-image",
            Error::TooSmall { .. } => "too-small",
            Error::NeedsColor => "needs-color",
            Error::DimensionMismatch(_) => "dimension-mismatch",
            Error::SampleOutOfRange { .. } => "sample-out-of-range",
            Error::UnnormalizedHistogram { .. } => "unnormalized-histogram",
            Error::EvenKernel { .. } => "even-kernel",
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::DegenerateSamples(_) => "degenerate-samples",
            Error::NonConvergence { .. } => "non-convergence",
            Error::ModelParse { .. } => "model-parse",
            Error::UnsupportedVersion { .. } => "unsupported-version",
            Error::Config { .. } => "config",
            Error::UnknownConfigKey { .. } => "config-unknown-key",
            Error::TrainEvalOverlap { .. } => "train-eval-overlap",
            Error::Malformed(_) => "malformed",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
