use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the analysis, masking, I/O and evaluation layers.
///
/// Every variant maps to a stable snake_case code (see [`Error::code`]) that
/// the CLI prints and the FFI layer translates into status integers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid STFT parameters: {0}")]
    InvalidParams(String),
    #[error("clip has {len} samples, fewer than one {window_len}-sample window")]
    ClipTooShort { len: usize, window_len: usize },
    #[error("overlap-add denominator vanishes at interior sample {0}")]
    ColaViolation(usize),
    #[error("imaginary residue {residue:.3e} exceeds tolerance for signal norm {norm:.3e}")]
    NonrealReconstruction { residue: f64, norm: f64 },
    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("mask is not symmetric about DC (bin {bin}, frame {frame})")]
    AsymmetricMask { bin: usize, frame: usize },
    #[error("label {label} outside 0..={max}")]
    LabelOutOfRange { label: u8, max: u8 },
    #[error("masks must be binary for segmentation scores (found label {0})")]
    NonBinaryMask(u8),
    #[error("multi-source separation needs at least two sources (got {0}); use denoise")]
    UseDenoise(u8),
    #[error("gain must be positive and finite (got {0})")]
    InvalidGain(f64),
    #[error("clips differ: {0}")]
    ClipMismatch(String),
    #[error("reference signal is silent; SDR is undefined")]
    UndefinedSdr,
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV file: {0}")]
    CorruptWav(String),
    #[error("image error: {0}")]
    Image(String),
    #[error("missing split directories under {root}: {missing:?}")]
    MissingSplits { root: PathBuf, missing: Vec<String> },
    #[error("split contains no clips")]
    EmptySplit,
    #[error("{0}")]
    InvalidArgument(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::ClipTooShort { .. } => "clip_too_short",
            Error::ColaViolation(_) => "cola_violation",
            Error::NonrealReconstruction { .. } => "nonreal_reconstruction",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::AsymmetricMask { .. } => "asymmetric_mask",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::NonBinaryMask(_) => "non_binary_mask",
            Error::UseDenoise(_) => "use_denoise",
            Error::InvalidGain(_) => "invalid_gain",
            Error::ClipMismatch(_) => "clip_mismatch",
            Error::UndefinedSdr => "undefined_sdr",
            Error::UnsupportedFormat(_) => "unsupported_format",
            Error::CorruptWav(_) => "corrupt_wav",
            Error::Image(_) => "image_error",
            Error::MissingSplits { .. } => "missing_splits",
            Error::EmptySplit => "empty_split",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Io { .. } => "io_error",
            Error::Json(_) => "json_error",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
