use std::io;

use crate::dsgs::wire::WireError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected_topics}x{expected_vocab}, got {topics}x{vocab}")]
    DimensionMismatch {
        expected_topics: usize,
        expected_vocab: usize,
        topics: usize,
        vocab: usize,
    },

    #[error("index out of range: topic {topic}, word {word} for a {topics}x{vocab} model")]
    OutOfRange {
        topic: usize,
        word: usize,
        topics: usize,
        vocab: usize,
    },

    /// A count would drop below zero. Always a sampler bug.
    #[error("count underflow at topic {topic}, word {word}")]
    CountUnderflow { topic: usize, word: usize },

    #[error("negative count {value} at topic {topic}, word {word}")]
    NegativeCount { topic: usize, word: usize, value: f64 },

    #[error("non-finite or zero conditional for word {word}")]
    NonFinite { word: usize },

    #[error("zero mixture probability for held-out word {word}")]
    ZeroProbability { word: usize },

    #[error("empty mini-batch")]
    EmptyBatch,

    #[error("no held-out tokens to score")]
    NoHeldoutTokens,

    #[error("server rejected push")]
    PushRejected,

    #[error("wire protocol: {0}")]
    Wire(#[from] WireError),

    #[error(transparent)]
    Io(#[from] io::Error),
}
