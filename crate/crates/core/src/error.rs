use std::path::PathBuf;

use crate::ffnn::EpochRecord;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular least-squares fit: {0}")]
    SingularFit(String),

    #[error("blur calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("agglomerate does not fit the {width}x{height} canvas with a {margin} px margin")]
    RenderOverflow {
        width: usize,
        height: usize,
        margin: usize,
    },

    #[error("area-preserving deformation did not converge after {0} rescale iterations")]
    DeformationFailed(usize),

    #[error("sphere packing failed: rejection budget exhausted for sphere {sphere}")]
    PackingFailed { sphere: usize },

    #[error("training diverged at epoch {epoch}: non-finite cost")]
    TrainingDiverged {
        epoch: usize,
        history: Vec<EpochRecord>,
    },

    #[error("parse error in `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("class {0} agglomerates are excluded from area regression")]
    ExcludedClass(usize),

    #[error("rational fit failed: {0}")]
    FitFailed(String),

    #[error("model state error: {0}")]
    State(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("image decode error: {0}")]
    Decode(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(field: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
