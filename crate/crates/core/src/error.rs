use thiserror::Error;

use crate::probmodel::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure mode surfaced by the coders, models and protocol client.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulation parameters: {0}")]
    InvalidParams(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("cannot quantize {tokens} tokens at precision {precision}")]
    CannotQuantize { tokens: usize, precision: u32 },

    #[error("token {0} is outside the vocabulary")]
    UnknownToken(TokenId),

    #[error("word {0:?} is not in the model vocabulary")]
    UnknownWord(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("empty corpus")]
    EmptyCorpus,

    /// The encoder hit its token budget before the message was disambiguated.
    #[error(
        "message too long: {tokens_emitted} tokens emitted, {consumed_bits} of {needed_bits} bits disambiguated"
    )]
    MessageTooLong {
        tokens_emitted: usize,
        consumed_bits: usize,
        needed_bits: usize,
        partial: Vec<TokenId>,
    },

    /// The decoder saw a token the sender could not have produced.
    #[error("desync at step {step}: token {token} {reason}")]
    Desync {
        step: usize,
        token: TokenId,
        reason: &'static str,
    },

    #[error("cover exhausted after {recovered} of {needed} bits")]
    TruncatedCover { recovered: usize, needed: usize },

    #[error("malformed bit stream: {0}")]
    MalformedStream(String),

    #[error("unsupported token {token} at step {step}")]
    UnsupportedToken { step: usize, token: TokenId },

    #[error("block key error: {0}")]
    Key(String),

    #[error("key mismatch: {0}")]
    KeyMismatch(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("context of {len} tokens exceeds the server maximum of {max}")]
    ContextTooLong { len: usize, max: usize },

    #[error("transport error: {0}")]
    Transport(String),

    #[error("model file format: {0}")]
    Format(String),

    #[error("key file: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
