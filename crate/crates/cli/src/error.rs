use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("cannot read config {path}: {reason}")]
    ConfigFile { path: PathBuf, reason: String },
    #[error("sweep grid has {cells} runs, above the cap of {cap}")]
    GridTooLarge { cells: usize, cap: usize },
    #[error(transparent)]
    Core(#[from] anonymix::Error),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for bad input data, 4 otherwise.
    pub fn exit_code(&self) -> i32 {
        use anonymix::Error as E;
        match self {
            CliError::Config(_) | CliError::ConfigFile { .. } | CliError::GridTooLarge { .. } => 2,
            CliError::Io { .. } | CliError::Runtime(_) => 4,
            CliError::Core(e) => match e {
                E::InvalidConfig { .. }
                | E::InvalidArgument(_)
                | E::InvalidParams(_)
                | E::InvalidForestConfig(_)
                | E::InvalidSchema(_)
                | E::SetTooLarge { .. }
                | E::UnknownAttribute(_)
                | E::KOutOfRange { .. } => 2,
                E::MissingColumn(_)
                | E::NonNumericFeature { .. }
                | E::NonFiniteFeature { .. }
                | E::DuplicateId(_)
                | E::EmptyDataset
                | E::RecordDimension { .. }
                | E::MissingLabel { .. }
                | E::SingleClass(_)
                | E::DimensionMismatch { .. }
                | E::MisalignedDatasets(_)
                | E::ZeroNormVector(_)
                | E::ModelVersion(_)
                | E::ModelAttributeMismatch { .. }
                | E::ModelLacksImportances(_)
                | E::UntrainedModel(_)
                | E::Io { .. }
                | E::Csv(_)
                | E::Json(_) => 3,
                _ => 4,
            },
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}
