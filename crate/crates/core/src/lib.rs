//! Linguistic steganography by arithmetic coding over language-model
//! next-token distributions, with the block and per-step Huffman baselines,
//! a text ↔ bits source coder and an evaluation harness.

pub mod arithmetic;
pub mod baselines;
pub mod bits;
pub mod corpus;
pub mod error;
pub mod key;
pub mod lm_protocol;
pub mod method;
pub mod metrics;
pub mod probmodel;
pub mod source_coding;

pub use arithmetic::{decode, encode, CoverText, IntervalState};
pub use bits::BitMessage;
pub use error::{Error, Result};
pub use method::{Method, MethodKind};
pub use probmodel::{
    modulate, next_distribution, quantize, LanguageModel, ModulationParams, NGramModel,
    TokenDistribution, TokenId, ToyModel, Vocabulary,
};
