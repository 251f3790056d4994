use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad grid spec, mismatched spaces, out-of-range parameters.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("construction error: {0}")]
    Construction(String),

    /// A numerical routine failed; `diagnostics` carries condition information.
    #[error("numerical error in {context}: {diagnostics}")]
    Numerical { context: String, diagnostics: String },

    #[error("CFL condition violated: dt = {dt:.3e} exceeds {limit:.3e}; try dt = {suggested:.3e}")]
    Cfl { dt: f64, limit: f64, suggested: f64 },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(context: impl Into<String>, diagnostics: impl Into<String>) -> Self {
        Error::Numerical { context: context.into(), diagnostics: diagnostics.into() }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { key: key.into(), message: message.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
