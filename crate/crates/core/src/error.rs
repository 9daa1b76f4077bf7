use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index {index} out of range (len {len})")]
    Range { index: usize, len: usize },
    #[error("sequence too short: need more than {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown motion kind `{0}`")]
    UnknownMotion(String),
    #[error("head-pelvis distance {0} m is too small to normalize by")]
    Normalization(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("filter diverged")]
    Diverged,
    #[error("non-finite loss at epoch {epoch}, batch {batch} (param norm {param_norm})")]
    NonFiniteLoss { epoch: usize, batch: usize, param_norm: f64 },
    #[error("non-finite function value at parameter {0}")]
    NonFinite(usize),
}
