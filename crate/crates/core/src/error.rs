use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("holdout size {requested} exceeds corpus size {available}")]
    HoldoutTooLarge { requested: usize, available: usize },

    #[error("minhash requires a non-empty shingle set")]
    EmptyShingleSet,

    #[error("bands ({bands}) x rows ({rows}) must equal num_perm ({num_perm})")]
    BandMismatch {
        bands: usize,
        rows: usize,
        num_perm: usize,
    },

    #[error("vocab size {requested} is below the floor of {floor} (specials + base alphabet)")]
    VocabTooSmall { requested: usize, floor: usize },

    #[error("token id {id} out of range for vocabulary of {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: usize },

    #[error("malformed tokenizer model: {0}")]
    Model(String),

    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),

    #[error("corpus contains no words")]
    ZeroWords,

    #[error("language {0:?} not present in parallel corpus")]
    MissingLanguage(String),

    #[error("model {0:?} not present in score table")]
    MissingModel(String),

    #[error("zero tokens for reference language {0:?}")]
    ZeroTokens(String),

    #[error("cost computation overflowed the representable range")]
    CostOverflow,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors caused by the data or configuration handed to us, as
    /// opposed to environment or internal failures.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_data_error(),
            e => !matches!(e, Error::Io(_) | Error::Write { .. }),
        }
    }
}
