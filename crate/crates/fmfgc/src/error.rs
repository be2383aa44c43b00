use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config key {key} = {value}: expected {range}")]
    Range {
        key: &'static str,
        value: String,
        range: &'static str,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Solver(#[from] fmfgc_core::Error),

    #[error("{0}")]
    Run(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short tag for machine-readable failure summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Range { .. } => "range",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Solver(_) => "solver",
            Error::Run(_) => "run",
        }
    }
}
