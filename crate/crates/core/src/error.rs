use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or configuration field is outside its admissible range.
    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A population moment has no closed form under the requested laws.
    #[error("no closed form: {0}")]
    NoClosedForm(String),

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid path: {0}")]
    InvalidPath(String),

    /// Operation is only defined for the other memory regime.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Two independent numerical routes to the same constant disagree.
    #[error("numerical consistency failure: {0}")]
    Consistency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
