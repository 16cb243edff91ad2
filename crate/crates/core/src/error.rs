use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigError;
use crate::types::ProblemId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rewards must be non-empty")]
    EmptyRewards,

    #[error("reward values must be 0 or 1, got {0}")]
    InvalidReward(u8),

    #[error("{what} out of range: {value}")]
    OutOfRange { what: &'static str, value: f64 },

    #[error("heap is empty")]
    EmptyHeap,

    #[error("problem {0} is already present")]
    DuplicateId(ProblemId),

    #[error("problem {0} is not present")]
    MissingId(ProblemId),

    #[error("sum-tree masses must be finite")]
    InfinitePriority,

    #[error("no sampleable mass")]
    NoSampleableMass,

    #[error("invalid configuration: {}", join_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error("no trainable problems")]
    NoTrainableProblems,

    #[error("select without report: a batch is still outstanding")]
    BatchOutstanding,

    #[error("report without outstanding batch")]
    NoOutstandingBatch,

    #[error("results do not match the outstanding batch: {0}")]
    ResultMismatch(String),

    #[error("problem {id}: expected {expected} rewards, got {got}")]
    RewardLength {
        id: ProblemId,
        expected: usize,
        got: usize,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", .path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    /// True for failures that originate in the filesystem rather than in
    /// the inputs or the scheduler contract.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv { source, .. } => source.is_io_error(),
            _ => false,
        }
    }
}

fn join_config_errors(errs: &[ConfigError]) -> String {
    errs.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
