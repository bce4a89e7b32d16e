use thiserror::Error;

/// Error taxonomy shared by every module in the workspace.
///
/// The CLI maps these onto its exit codes: `Io` becomes exit 2, `Dimension`
/// and `Precondition` become exit 3, `Numerical` becomes exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A file could not be read, written, or parsed as the expected format
    /// (missing checkpoint, truncated blob, bad magic).
    #[error("io failure: {0}")]
    Io(String),

    /// Inputs whose shapes must agree do not (image sizes, channel counts,
    /// tensor layouts).
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An argument violates a documented domain requirement (negative
    /// radiance, angle out of range, invalid hyperparameter, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A computation produced or encountered non-finite values, failed to
    /// converge, or was asked for an undefined quantity (mean over an empty
    /// mask).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
