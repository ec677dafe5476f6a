use std::path::PathBuf;

use thiserror::Error;

/// Failures of the experiment runner, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config{}: {message}", line.map(|l| format!(" line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, message: String },
    #[error("cannot place {classes} class means in d = {dim} with pairwise angle >= {margin:.4} rad")]
    MeanPlacementFailed { classes: usize, dim: usize, margin: f64 },
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: row {row} has norm {norm} (expected 1 within 1e-6)")]
    NonUnitVector { path: PathBuf, row: usize, norm: f64 },
    #[error("data: {0}")]
    Data(String),
    #[error("{stage}: {source}")]
    Numeric {
        stage: &'static str,
        #[source]
        source: vmfdiff::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        Self::Config {
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status: 2 config, 3 data, 4 numeric, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::MeanPlacementFailed { .. } => 2,
            Self::Parse { .. } | Self::NonUnitVector { .. } | Self::Data(_) => 3,
            Self::Numeric { .. } => 4,
            Self::Io { .. } => 1,
        }
    }
}

/// Tags a core error with the pipeline stage it came from.
pub(crate) trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> Stage<T> for std::result::Result<T, vmfdiff::Error> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|source| CliError::Numeric { stage, source })
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
