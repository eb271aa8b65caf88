use thiserror::Error;

/// Errors surfaced by estimation, learning, and I/O routines.
#[derive(Error, Debug)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("treatment arm {arm} has no observations")]
    EmptyArm { arm: usize },

    #[error("perfect separation detected: coefficient magnitude exceeded {bound} on the logit scale")]
    Separation { bound: f64 },

    #[error("fluctuation coefficient diverged: |epsilon| reached {bound} (min PS {ps_min:.3e})")]
    EpsilonDiverged { bound: f64, ps_min: f64 },

    #[error("fold {fold} has no treated units in its training split")]
    FoldWithoutTreated { fold: usize },

    #[error("fold {fold} failed: {source}")]
    FoldFailure {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("all candidate learners failed cross-validation")]
    AllCandidatesFailed,

    #[error("propensity score is zero for a treated unit at row {row}")]
    ZeroPropensity { row: usize },

    #[error("csv parse error at row {row}, column {column}: {message}")]
    CsvCell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("column {0:?} not found in CSV header")]
    MissingColumn(String),

    #[error("missing value in required column {column} at row {row}")]
    MissingRequired { column: String, row: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
