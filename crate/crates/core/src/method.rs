//! One enum over the three coders so callers can pick a method at run time.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::arithmetic::{self, CoverText};
use crate::baselines::{block_decode, block_encode, huffman_decode, huffman_encode, BlockKey};
use crate::bits::BitMessage;
use crate::error::Result;
use crate::probmodel::{LanguageModel, ModulationParams, TokenId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Arithmetic,
    Huffman,
    Block,
}

impl MethodKind {
    pub const ALL: [MethodKind; 3] = [Self::Arithmetic, Self::Huffman, Self::Block];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Arithmetic => "arithmetic",
            Self::Huffman => "huffman",
            Self::Block => "block",
        }
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A coder together with all of its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Method {
    Arithmetic(ModulationParams),
    Huffman { truncation: usize },
    Block { block_bits: u32, seed: u64 },
}

impl Method {
    pub fn kind(&self) -> MethodKind {
        match self {
            Self::Arithmetic(_) => MethodKind::Arithmetic,
            Self::Huffman { .. } => MethodKind::Huffman,
            Self::Block { .. } => MethodKind::Block,
        }
    }

    /// The value a sweep varies: τ, the truncation length or `|B|`.
    pub fn tuning_value(&self) -> f64 {
        match self {
            Self::Arithmetic(p) => p.temperature,
            Self::Huffman { truncation } => *truncation as f64,
            Self::Block { block_bits, .. } => *block_bits as f64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Arithmetic(p) => p.validate(),
            Self::Huffman { truncation } if *truncation < 2 => Err(crate::Error::InvalidParams(
                format!("Huffman truncation must be at least 2, got {truncation}"),
            )),
            Self::Huffman { .. } => Ok(()),
            Self::Block { block_bits, seed } => BlockKey::new(*block_bits, *seed).map(|_| ()),
        }
    }

    pub fn encode<M: LanguageModel + ?Sized>(
        &self,
        message: &BitMessage,
        context: &[TokenId],
        model: &M,
        max_tokens: Option<usize>,
    ) -> Result<CoverText> {
        match self {
            Self::Arithmetic(p) => arithmetic::encode(message, context, model, p, max_tokens),
            Self::Huffman { truncation } => {
                huffman_encode(message, context, model, *truncation, max_tokens)
            }
            Self::Block { block_bits, seed } => block_encode(
                message,
                context,
                model,
                &BlockKey::new(*block_bits, *seed)?,
                max_tokens,
            ),
        }
    }

    pub fn decode<M: LanguageModel + ?Sized>(
        &self,
        cover: &CoverText,
        model: &M,
    ) -> Result<BitMessage> {
        match self {
            Self::Arithmetic(p) => arithmetic::decode(cover, model, p),
            Self::Huffman { truncation } => huffman_decode(cover, model, *truncation),
            Self::Block { block_bits, seed } => {
                block_decode(cover, model, &BlockKey::new(*block_bits, *seed)?)
            }
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Arithmetic(p) => {
                write!(f, "arithmetic(tau={}, k=", p.temperature)?;
                match p.top_k {
                    Some(k) => write!(f, "{k}")?,
                    None => f.write_str("all")?,
                }
                write!(f, ", precision={})", p.precision)
            }
            Self::Huffman { truncation } => write!(f, "huffman(truncation={truncation})"),
            Self::Block { block_bits, seed } => write!(f, "block(bits={block_bits}, seed={seed})"),
        }
    }
}
