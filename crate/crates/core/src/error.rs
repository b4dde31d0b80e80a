use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("model input has {got} features, expected {expected}")]
    FeatureMismatch { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("non-finite prediction at grid point {grid_index} (value {grid_value}), row {row}")]
    NonFinitePrediction {
        grid_index: usize,
        grid_value: f64,
        row: usize,
    },

    #[error(
        "unreachable target for feature `{feature}` at grid value {grid_value}: \
         no permuted row is classified as extrapolation"
    )]
    UnreachableTarget { feature: String, grid_value: f64 },

    #[error("feature `{0}` cannot be manipulated: none of its permuted rows is flagged")]
    Unmanipulable(String),

    #[error("degenerate target: original PD already equals the target but the adversarial PD does not")]
    DegenerateTarget,

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Schema(_) | Error::InvalidArgument(_) | Error::Unmanipulable(_) => {
                ErrorClass::Config
            }
            Error::Cell { .. }
            | Error::Empty(_)
            | Error::FeatureMismatch { .. }
            | Error::ModelFormat(_)
            | Error::Io(_)
            | Error::Csv(_) => ErrorClass::Data,
            Error::Diverged { .. }
            | Error::NonFinitePrediction { .. }
            | Error::UnreachableTarget { .. }
            | Error::DegenerateTarget => ErrorClass::Numeric,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
