use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants are deliberately fine-grained so callers (and the CLI's exit-code
/// mapping) can tell a malformed file from a shape bug from a diverged run.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("kernel size must be odd for symmetric same-padding, got {0}")]
    EvenKernel(usize),

    #[error("dilation must be at least 1")]
    ZeroDilation,

    #[error("empty volume: a sequence needs at least one slice")]
    EmptyVolume,

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("feature dimension mismatch: model expects {expected}, volume has {actual}")]
    FeatureDim { expected: usize, actual: usize },

    #[error("invalid architecture: {0}")]
    InvalidArch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid label index {0}")]
    InvalidLabel(usize),

    #[error("forward cache does not belong to the current model parameters")]
    StaleCache,

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (this build reads version {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("parameter length mismatch: header says {declared}, architecture needs {expected}")]
    ParamLengthMismatch { declared: u64, expected: u64 },

    #[error("non-finite value at element {index}")]
    NonFinite { index: usize },

    #[error("manifest row {row}: {message}")]
    ManifestRow { row: usize, message: String },

    #[error("manifest row {row}: duplicate patient_id {id:?}")]
    DuplicatePatient { row: usize, id: String },

    #[error("manifest row {row}: missing file {path}")]
    MissingFile { row: usize, path: PathBuf },

    #[error("cannot stratify: class {class} has only {count} patient(s)")]
    Unstratifiable { class: &'static str, count: usize },

    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged {
        epoch: usize,
        step: usize,
        loss: f64,
        /// Parameters as they were before the step that produced the non-finite loss.
        last_finite: Box<crate::model::MsNetModel>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn shape_err(
    context: &'static str,
    expected: impl ToString,
    actual: impl ToString,
) -> Error {
    Error::ShapeMismatch {
        context,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}
