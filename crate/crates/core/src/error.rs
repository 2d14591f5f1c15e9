use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The denominator vanished at this frequency: a pole on or next to the
    /// imaginary axis.
    #[error("singular evaluation at {freq_hz} Hz (|den| = {magnitude:e})")]
    SingularEvaluation { freq_hz: f64, magnitude: f64 },

    /// Carrier amplitude (or filter response at the carrier) is too small to
    /// normalize the sidebands against.
    #[error("degenerate carrier (|carrier| = {magnitude:e})")]
    DegenerateCarrier { magnitude: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("parse error at line {line}, column {column}: {reason}")]
    Parse {
        line: usize,
        column: usize,
        reason: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// Short machine-readable token, used in the CSV `status` column.
    pub fn token(&self) -> &'static str {
        match self {
            Error::SingularEvaluation { .. } => "singular",
            Error::DegenerateCarrier { .. } => "degenerate_carrier",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::InvalidFilter(_) => "invalid_filter",
            Error::Parse { .. } => "parse_error",
        }
    }

    /// True for failures of the numerics rather than of the input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::SingularEvaluation { .. } | Error::DegenerateCarrier { .. }
        )
    }
}
