use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage, used to tag errors surfaced by [`crate::pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    FeatureRanking,
    Searchlight,
    Baselines,
    Emit,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::FeatureRanking => "rank-features",
            Stage::Searchlight => "searchlight",
            Stage::Baselines => "baselines",
            Stage::Emit => "emit",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: missing column `{column}` in header")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid crosswalk: {0}")]
    Crosswalk(String),

    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("cannot parse `{text}` as {what}")]
    Parse { text: String, what: &'static str },

    #[error("baseline year {0} does not occur in the loaded data")]
    BaselineMissing(i32),

    #[error("no-data: no records survived cleaning")]
    NoData,

    #[error("unknown measure column `{0}`")]
    UnknownMeasure(String),

    #[error("unknown feature column `{0}`")]
    UnknownFeature(String),

    #[error("too-few-points: {points} points for {required} required")]
    TooFewPoints { points: usize, required: usize },

    #[error("dimension mismatch: expected {expected}, found {found} at point {index}")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        index: usize,
    },

    #[error("point {0} has a non-finite component")]
    NonFinite(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input")]
    EmptyInput,

    #[error("mismatched key universes: {0}")]
    KeyMismatch(String),

    #[error("[{stage}] {source}")]
    Staged {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn staged(self, stage: Stage) -> Self {
        match self {
            e @ Error::Staged { .. } => e,
            e => Error::Staged {
                stage,
                source: Box::new(e),
            },
        }
    }

    /// Process exit code: 1 validation, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Staged { source, .. } => source.exit_code(),
            Error::Schema(_)
            | Error::Crosswalk(_)
            | Error::Config { .. }
            | Error::InvalidParameter(_)
            | Error::UnknownMeasure(_)
            | Error::UnknownFeature(_) => 1,
            Error::MissingColumn { .. }
            | Error::Malformed { .. }
            | Error::Parse { .. }
            | Error::BaselineMissing(_)
            | Error::NoData
            | Error::TooFewPoints { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::EmptyInput
            | Error::KeyMismatch(_) => 2,
            Error::Io { .. } | Error::Internal(_) => 3,
        }
    }
}
