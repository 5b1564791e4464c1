use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse {what} from {input:?}: {reason}")]
    Parse {
        what: &'static str,
        input: String,
        reason: String,
    },

    #[error("expected {expected} round keys, got {actual}")]
    RoundKeyCount { expected: usize, actual: usize },

    #[error("round index {0} is outside 0..=29")]
    RoundOutOfRange(usize),

    #[error("invalid fault: {0}")]
    InvalidFault(String),

    /// The correct and faulty ciphertexts do not show the difference the
    /// fault model requires (e.g. the fault did not land).
    #[error("ciphertext pair rejected: {0}")]
    PairRejected(String),

    /// No hypothesis survived the difference constraints; the input does not
    /// conform to the assumed fault model.
    #[error("inconsistent fault data: {0}")]
    Inconsistent(String),

    #[error("round key {round} is not uniquely determined (nibble {nibble} has {candidates} candidates)")]
    NotUnique {
        round: usize,
        nibble: usize,
        candidates: u32,
    },

    #[error("no master-key candidate reproduces the anchor pair (rank {rank}, {tried} candidates tried)")]
    NoCandidateVerifies { rank: usize, tried: u64 },

    #[error("key-schedule system leaves {kernel_dim} free bits (limit {limit}); refusing to enumerate")]
    KernelTooLarge { kernel_dim: usize, limit: usize },

    #[error("invalid campaign configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn parse_err(what: &'static str, input: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        what,
        input: input.to_owned(),
        reason: reason.into(),
    }
}
