//! Block coding: the vocabulary is split into `2^|B|` secret bins and each
//! token carries one fixed `|B|`-bit chunk, namely the index of its bin.
//! The sender always emits the most probable token of the chosen bin.

use crate::arithmetic::{default_max_tokens, CoverText};
use crate::bits::{padded_bit, BitMessage, HEADER_BITS};
use crate::error::{Error, Result};
use crate::probmodel::{check_context, check_probabilities, LanguageModel, TokenId};

use super::SplitMix64;

pub const MAX_BLOCK_BITS: u32 = 16;

/// Shared secret for block coding: chunk width and the bin shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BlockKey {
    block_bits: u32,
    seed: u64,
}

impl BlockKey {
    pub const ENCODED_LEN: usize = 10;

    pub fn new(block_bits: u32, seed: u64) -> Result<Self> {
        if !(1..=MAX_BLOCK_BITS).contains(&block_bits) {
            return Err(Error::Key(format!(
                "block size must lie in 1..={MAX_BLOCK_BITS}, got {block_bits}"
            )));
        }
        Ok(Self { block_bits, seed })
    }

    pub fn block_bits(&self) -> u32 {
        self.block_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bins(&self) -> usize {
        1 << self.block_bits
    }

    /// `|B|` as big-endian u16 followed by the big-endian seed.
    pub fn to_bytes(&self) -> [u8; Self::ENCODED_LEN] {
        let mut out = [0u8; Self::ENCODED_LEN];
        out[..2].copy_from_slice(&(self.block_bits as u16).to_be_bytes());
        out[2..].copy_from_slice(&self.seed.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bytes: [u8; Self::ENCODED_LEN] = bytes
            .try_into()
            .map_err(|_| Error::Key(format!("expected 10 bytes, got {}", bytes.len())))?;
        let bits = u16::from_be_bytes([bytes[0], bytes[1]]) as u32;
        let seed = u64::from_be_bytes(bytes[2..].try_into().expect("8 bytes"));
        Self::new(bits, seed)
    }

    /// Token → bin table: Fisher–Yates shuffle of all token ids driven by
    /// splitmix64 from `seed`, then bins assigned round-robin along the
    /// shuffled order.
    pub fn assignment(&self, vocab_size: usize) -> BlockAssignment {
        let mut ids: Vec<TokenId> = (0..vocab_size as TokenId).collect();
        let mut rng = SplitMix64::new(self.seed);
        for i in (1..vocab_size).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            ids.swap(i, j);
        }
        let bins = self.bins();
        let mut bin_of = vec![0u32; vocab_size];
        let mut members = vec![Vec::new(); bins];
        for (pos, &id) in ids.iter().enumerate() {
            bin_of[id as usize] = (pos % bins) as u32;
            members[pos % bins].push(id);
        }
        for m in members.iter_mut() {
            m.sort_unstable();
        }
        BlockAssignment {
            key: *self,
            bin_of,
            members,
        }
    }
}

/// Bins derived from a [`BlockKey`] for one vocabulary size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockAssignment {
    key: BlockKey,
    bin_of: Vec<u32>,
    members: Vec<Vec<TokenId>>,
}

impl BlockAssignment {
    /// Builds an assignment from an explicit token → bin table.
    pub fn from_bins(key: BlockKey, bin_of: Vec<u32>) -> Result<Self> {
        let mut members = vec![Vec::new(); key.bins()];
        for (id, &b) in bin_of.iter().enumerate() {
            members
                .get_mut(b as usize)
                .ok_or_else(|| Error::Key(format!("bin {b} out of range")))?
                .push(id as TokenId);
        }
        Ok(Self {
            key,
            bin_of,
            members,
        })
    }

    pub fn key(&self) -> BlockKey {
        self.key
    }

    pub fn bin_of(&self, token: TokenId) -> Option<u32> {
        self.bin_of.get(token as usize).copied()
    }

    pub fn members(&self, bin: u32) -> &[TokenId] {
        &self.members[bin as usize]
    }

    pub fn vocab_size(&self) -> usize {
        self.bin_of.len()
    }

    /// Most probable supported token of `bin`, lowest id on ties.
    pub fn argmax(&self, raw: &[f64], bin: u32) -> Option<TokenId> {
        let mut best: Option<(TokenId, f64)> = None;
        for &t in self.members(bin) {
            let p = raw[t as usize];
            if p > 0.0 && best.is_none_or(|(_, bp)| p > bp) {
                best = Some((t, p));
            }
        }
        best.map(|b| b.0)
    }

    /// The argmax of every bin, i.e. the support of the induced distribution.
    pub fn argmaxes(&self, raw: &[f64]) -> Vec<Option<TokenId>> {
        (0..self.key.bins() as u32)
            .map(|b| self.argmax(raw, b))
            .collect()
    }
}

fn raw_step<M: LanguageModel + ?Sized>(
    model: &M,
    ctx: &[TokenId],
    assignment: &BlockAssignment,
) -> Result<Vec<f64>> {
    let raw = model.raw_distribution(ctx)?;
    if raw.len() != assignment.vocab_size() {
        return Err(Error::Key(format!(
            "key derived for {} tokens, model has {}",
            assignment.vocab_size(),
            raw.len()
        )));
    }
    check_probabilities(&raw)?;
    Ok(raw)
}

/// Block step as reported to observers.
#[derive(Debug)]
pub struct BlockStep<'a> {
    pub raw: &'a [f64],
    pub bin: u32,
    pub token: TokenId,
}

/// Encodes raw `bits`, padded to a whole number of chunks, one chunk per
/// token.
pub fn block_encode_bits<M: LanguageModel + ?Sized>(
    bits: &[bool],
    context: &[TokenId],
    model: &M,
    assignment: &BlockAssignment,
    max_tokens: usize,
    mut observe: impl FnMut(&BlockStep<'_>),
) -> Result<CoverText> {
    check_context(model.vocabulary(), context)?;
    let width = assignment.key().block_bits() as usize;
    let steps = bits.len().div_ceil(width);
    if steps > max_tokens {
        return Err(Error::MessageTooLong {
            tokens_emitted: 0,
            consumed_bits: 0,
            needed_bits: bits.len(),
            partial: Vec::new(),
        });
    }
    let mut ctx = context.to_vec();
    let mut tokens = Vec::with_capacity(steps);
    for step in 0..steps {
        let bin = (0..width).fold(0u32, |acc, j| {
            (acc << 1) | padded_bit(bits, step * width + j) as u32
        });
        let raw = raw_step(model, &ctx, assignment)?;
        let token = assignment
            .argmax(&raw, bin)
            .ok_or_else(|| Error::Key(format!("bin {bin} holds no supported token")))?;
        observe(&BlockStep {
            raw: &raw,
            bin,
            token,
        });
        tokens.push(token);
        ctx.push(token);
    }
    Ok(CoverText::new(context.to_vec(), tokens))
}

/// Bin indices of the cover tokens, concatenated, until `enough` is
/// satisfied.
pub fn block_decode_bits<M: LanguageModel + ?Sized>(
    cover: &CoverText,
    model: &M,
    assignment: &BlockAssignment,
    mut enough: impl FnMut(&[bool]) -> bool,
) -> Result<Vec<bool>> {
    check_context(model.vocabulary(), &cover.context)?;
    let width = assignment.key().block_bits();
    let mut ctx = cover.context.clone();
    let mut bits = Vec::new();
    for (step, &token) in cover.tokens.iter().enumerate() {
        if enough(&bits) {
            break;
        }
        let bin = assignment.bin_of(token).ok_or(Error::UnknownToken(token))?;
        let raw = raw_step(model, &ctx, assignment)?;
        if assignment.argmax(&raw, bin) != Some(token) {
            return Err(Error::Desync {
                step,
                token,
                reason: "is not the most probable token of its bin",
            });
        }
        bits.extend((0..width).rev().map(|j| (bin >> j) & 1 == 1));
        ctx.push(token);
    }
    Ok(bits)
}

pub fn block_encode<M: LanguageModel + ?Sized>(
    message: &BitMessage,
    context: &[TokenId],
    model: &M,
    key: &BlockKey,
    max_tokens: Option<usize>,
) -> Result<CoverText> {
    let framed = message.framed();
    let assignment = key.assignment(model.vocabulary().len());
    let budget = max_tokens.unwrap_or_else(|| default_max_tokens(framed.len()));
    block_encode_bits(&framed, context, model, &assignment, budget, |_| {})
}

pub fn block_decode<M: LanguageModel + ?Sized>(
    cover: &CoverText,
    model: &M,
    key: &BlockKey,
) -> Result<BitMessage> {
    let assignment = key.assignment(model.vocabulary().len());
    let bits = block_decode_bits(cover, model, &assignment, |bits| {
        BitMessage::announced_len(bits).is_some_and(|n| bits.len() >= HEADER_BITS + n)
    })?;
    BitMessage::unframe(&bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::ToyModel;

    /// {A:0.4, B:0.3, C:0.2, D:0.1} at every step with bins {A,C} / {B,D}.
    fn setup() -> (ToyModel, BlockAssignment) {
        let model = ToyModel::iid(&[(4, 10), (3, 10), (2, 10), (1, 10)]).unwrap();
        let key = BlockKey::new(1, 0).unwrap();
        // ids: <s>=0 </s>=1 A=2 B=3 C=4 D=5; markers never win a bin here
        let assignment = BlockAssignment::from_bins(key, vec![0, 1, 0, 1, 0, 1]).unwrap();
        (model, assignment)
    }

    #[test]
    fn argmax_within_bin() {
        let (model, assignment) = setup();
        let cover =
            block_encode_bits(&[false, true], &[], &model, &assignment, 10, |_| {}).unwrap();
        assert_eq!(cover.tokens, vec![2, 3]);
        let bits = block_decode_bits(&cover, &model, &assignment, |_| false).unwrap();
        assert_eq!(bits, vec![false, true]);
    }

    #[test]
    fn token_b_decodes_to_one() {
        let (model, assignment) = setup();
        let cover = CoverText::new(vec![], vec![3]);
        let bits = block_decode_bits(&cover, &model, &assignment, |_| false).unwrap();
        assert_eq!(bits, vec![true]);
    }

    #[test]
    fn non_argmax_is_desync() {
        let (model, assignment) = setup();
        // D shares B's bin but is less probable
        let cover = CoverText::new(vec![], vec![2, 5]);
        assert!(matches!(
            block_decode_bits(&cover, &model, &assignment, |_| false),
            Err(Error::Desync { step: 1, token: 5, .. })
        ));
    }

    #[test]
    fn one_token_per_chunk() {
        let model = ToyModel::once_upon_a_time();
        let key = BlockKey::new(1, 7).unwrap();
        let msg = BitMessage::from_bit_str("10110").unwrap();
        let ctx = [model.vocabulary().bos()];
        match block_encode(&msg, &ctx, &model, &key, None) {
            Ok(cover) => {
                assert_eq!(cover.len(), 37);
                assert_eq!(block_decode(&cover, &model, &key).unwrap(), msg);
            }
            // a bin without any supported continuation is a key error
            Err(Error::Key(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn key_serialization() {
        let key = BlockKey::new(5, 0xDEAD_BEEF_0123_4567).unwrap();
        let bytes = key.to_bytes();
        assert_eq!(bytes.len(), 10);
        assert_eq!(&bytes[..2], &[0, 5]);
        assert_eq!(BlockKey::from_bytes(&bytes).unwrap(), key);
        assert!(BlockKey::new(0, 1).is_err());
        assert!(BlockKey::from_bytes(&bytes[..9]).is_err());
    }

    #[test]
    fn every_bin_nonempty_when_vocab_large_enough() {
        let key = BlockKey::new(3, 11).unwrap();
        let a = key.assignment(8);
        assert!((0..8).all(|b| a.members(b).len() == 1));
        let a = key.assignment(100);
        assert!((0..8).all(|b| !a.members(b).is_empty()));
        assert_eq!(a, key.assignment(100));
    }
}
