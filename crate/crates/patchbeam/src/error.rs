use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(patchbeam_core::Error),

    #[error("static system is singular or ill-conditioned (residual {residual:e})")]
    RankDeficient { residual: f64 },

    #[error("eigen solver converged {converged} of {requested} values; worst residuals {residuals:?}")]
    EigenNotConverged { converged: usize, requested: usize, residuals: Vec<f64> },

    #[error("linear algebra backend: {0}")]
    Backend(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<patchbeam_core::Error> for Error {
    fn from(e: patchbeam_core::Error) -> Self {
        use patchbeam_core::Error as C;
        match e {
            C::Config { field, reason } => Error::Config { field, reason },
            C::Domain { what, value } => Error::Config { field: what.to_string(), reason: format!("value {value} out of range") },
            C::SingularMaterial { poisson_ratio } => Error::Config {
                field: "poisson_ratio".into(),
                reason: format!("{poisson_ratio} must lie below 0.5"),
            },
            other => Error::Core(other),
        }
    }
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config { field: field.into(), reason: reason.into() }
    }

    /// Process exit code: 2 for bad input, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Config { .. } | Error::Io { .. } => 2,
            _ => 3,
        }
    }
}
