use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    // --- schema and dataset ---
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("column `{0}` named in the schema is missing from the header")]
    MissingColumn(String),
    #[error("non-numeric feature value at row {row}, column `{column}`: {value:?}")]
    NonNumericFeature {
        row: usize,
        column: String,
        value: String,
    },
    #[error("non-finite feature value at row {row}, column `{column}`")]
    NonFiniteFeature { row: usize, column: String },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("record `{id}` has {found} features, expected {expected}")]
    RecordDimension {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("record `{id}` has no label for attribute `{attribute}`")]
    MissingLabel { id: String, attribute: String },
    #[error("invalid synthetic config: {field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // --- relevance ---
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("model for `{0}` exposes no feature importances")]
    ModelLacksImportances(String),
    #[error("model was trained on `{model}`, not `{requested}`")]
    ModelAttributeMismatch { model: String, requested: String },

    // --- forest ---
    #[error("attribute `{0}` has a single class; nothing to learn")]
    SingleClass(String),
    #[error("invalid forest config: {0}")]
    InvalidForestConfig(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported model format version {0}")]
    ModelVersion(u32),

    // --- transform ---
    #[error("invalid anonymization params: {0}")]
    InvalidParams(String),
    #[error("random set size {set_size} exceeds dataset size {records}")]
    SetTooLarge { set_size: usize, records: usize },
    #[error("random set has no members")]
    EmptyMembers,
    #[error("random set does not contain the target record")]
    TargetNotInMembers,

    // --- metrics ---
    #[error("value {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("zero-norm feature vector for record `{0}`")]
    ZeroNormVector(String),
    #[error("k = {k} is outside [1, {n}]")]
    KOutOfRange { k: usize, n: usize },
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
    #[error("datasets are not aligned: {0}")]
    MisalignedDatasets(String),
    #[error("no trained model for attribute `{0}`")]
    UntrainedModel(String),

    // --- io ---
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
