use thiserror::Error;

use crate::estimation::MleFit;

pub type Result<T> = std::result::Result<T, CalibError>;

#[derive(Debug, Error)]
pub enum CalibError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("LLO map with gamma = {gamma} has no inverse")]
    NonInvertible { gamma: f64 },

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// The likelihood increases without bound, e.g. every outcome is the
    /// same class or the outcomes are perfectly separated by the predictions.
    #[error("maximum likelihood estimate diverges: {0}")]
    Divergence(String),

    #[error("optimizer did not converge after {} iterations", best.iterations)]
    NonConvergence { best: Box<MleFit> },

    #[error("AUC is undefined when only one outcome class is present")]
    UndefinedAuc,

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CalibError {
    /// True for failures caused by the input data rather than by numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            CalibError::InvalidData(_)
                | CalibError::Divergence(_)
                | CalibError::UndefinedAuc
                | CalibError::Parse { .. }
                | CalibError::Io(_)
                | CalibError::Csv(_)
        )
    }
}
