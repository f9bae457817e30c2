//! Next-token distributions as the coders see them.
//!
//! A [`LanguageModel`] hands out real-valued probability vectors. Before any
//! coder touches them they pass through [`modulate`] (top-k truncation and
//! temperature) and [`quantize`] (integer weights summing to a power of two),
//! producing a [`TokenDistribution`]. Encoder and decoder must derive
//! bit-identical tables from the same context, so every ordering decision in
//! this module is total: descending weight, ties broken by ascending token id.

mod ngram;
mod text;
mod toy;
mod vocab;

use std::cmp::{Ordering, Reverse};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ngram::{NGramModel, NGRAM_MAGIC, NGRAM_VERSION};
pub use text::{detokenize_words, join_words, split_text, tokenize_words};
pub use toy::ToyModel;
pub use vocab::{Vocabulary, BOS, BOS_SURFACE, EOS, EOS_SURFACE};

pub type TokenId = u32;

/// Tolerance on the sum of a raw probability vector.
pub const SUM_TOLERANCE: f64 = 1e-6;

pub const MIN_PRECISION: u32 = 16;
pub const MAX_PRECISION: u32 = 62;
pub const DEFAULT_PRECISION: u32 = 32;

/// A conditional next-token model shared by sender and receiver.
///
/// `raw_distribution` must be a pure function of its context: the decoder
/// replays exactly the calls the encoder made and any drift desynchronizes
/// the two sides.
pub trait LanguageModel: Send + Sync {
    fn vocabulary(&self) -> &Vocabulary;

    /// Probability of every vocabulary entry following `context`, indexed by
    /// token id.
    fn raw_distribution(&self, context: &[TokenId]) -> Result<Vec<f64>>;

    /// The conditioning sequence used when no context is given.
    fn empty_context(&self) -> Vec<TokenId> {
        vec![self.vocabulary().bos()]
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        tokenize_words(self.vocabulary(), text)
    }

    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        detokenize_words(self.vocabulary(), ids)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for &M {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }
    fn raw_distribution(&self, context: &[TokenId]) -> Result<Vec<f64>> {
        (**self).raw_distribution(context)
    }
    fn empty_context(&self) -> Vec<TokenId> {
        (**self).empty_context()
    }
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        (**self).tokenize(text)
    }
    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        (**self).detokenize(ids)
    }
}

impl<M: LanguageModel + ?Sized> LanguageModel for Box<M> {
    fn vocabulary(&self) -> &Vocabulary {
        (**self).vocabulary()
    }
    fn raw_distribution(&self, context: &[TokenId]) -> Result<Vec<f64>> {
        (**self).raw_distribution(context)
    }
    fn empty_context(&self) -> Vec<TokenId> {
        (**self).empty_context()
    }
    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        (**self).tokenize(text)
    }
    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        (**self).detokenize(ids)
    }
}

/// Temperature, top-k and quantization resolution.
///
/// `top_k = None` keeps the full vocabulary. A `top_k` larger than the
/// number of supported tokens keeps them all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationParams {
    pub temperature: f64,
    #[serde(default)]
    pub top_k: Option<usize>,
    #[serde(default = "default_precision")]
    pub precision: u32,
}

fn default_precision() -> u32 {
    DEFAULT_PRECISION
}

impl Default for ModulationParams {
    fn default() -> Self {
        Self::unmodulated()
    }
}

impl ModulationParams {
    pub fn new(temperature: f64, top_k: Option<usize>, precision: u32) -> Result<Self> {
        let params = Self {
            temperature,
            top_k,
            precision,
        };
        params.validate()?;
        Ok(params)
    }

    /// τ = 1 over the full vocabulary at the default precision.
    pub fn unmodulated() -> Self {
        Self {
            temperature: 1.0,
            top_k: None,
            precision: DEFAULT_PRECISION,
        }
    }

    pub fn with_precision(mut self, precision: u32) -> Self {
        self.precision = precision;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidParams(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if self.top_k == Some(0) {
            return Err(Error::InvalidParams("top_k must be at least 1".into()));
        }
        if !(MIN_PRECISION..=MAX_PRECISION).contains(&self.precision) {
            return Err(Error::InvalidParams(format!(
                "precision must lie in {MIN_PRECISION}..={MAX_PRECISION}, got {}",
                self.precision
            )));
        }
        Ok(())
    }
}

/// Checks that `probs` is a finite, non-negative vector summing to one.
pub fn check_probabilities(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("empty probability vector".into()));
    }
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}, expected a finite non-negative probability"
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {sum}"
        )));
    }
    Ok(())
}

/// Sort key for descending probability, ties by ascending token id. The
/// bit pattern of a non-negative float orders like its value.
fn rank_key(e: &(TokenId, f64)) -> (Reverse<u64>, TokenId) {
    (Reverse(e.1.to_bits()), e.0)
}

fn by_weight(a: &(TokenId, u64), b: &(TokenId, u64)) -> Ordering {
    b.1.cmp(&a.1).then(a.0.cmp(&b.0))
}

// Inputs usually arrive in rank order already.
fn sort_by_weight(entries: &mut [(TokenId, u64)]) {
    if entries.windows(2).any(|w| by_weight(&w[0], &w[1]) == Ordering::Greater) {
        entries.sort_unstable_by(by_weight);
    }
}

/// Support of `dist` restricted to its `k` most probable tokens, ordered by
/// rank. Zero-probability tokens never survive.
pub fn top_k(dist: &[f64], k: Option<usize>) -> Vec<(TokenId, f64)> {
    let mut support: Vec<(TokenId, f64)> = dist
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(id, &p)| (id as TokenId, p))
        .collect();
    if let Some(k) = k {
        if k < support.len() {
            support.select_nth_unstable_by_key(k - 1, rank_key);
            support.truncate(k);
        }
    }
    support.sort_unstable_by_key(rank_key);
    support
}

/// Truncates `dist` to its top-k tokens, sharpens or flattens it by
/// `p^(1/τ)` and renormalizes. The result is ordered by rank.
pub fn modulate(dist: &[f64], params: &ModulationParams) -> Result<Vec<(TokenId, f64)>> {
    params.validate()?;
    check_probabilities(dist)?;
    let mut kept = top_k(dist, params.top_k);
    if kept.is_empty() {
        return Err(Error::InvalidDistribution(
            "no probability mass left after truncation".into(),
        ));
    }

    if params.temperature != 1.0 {
        // Work relative to the most probable token so small p^(1/τ) do not
        // underflow before normalization.
        let log_max = kept[0].1.ln();
        let inv_t = 1.0 / params.temperature;
        for entry in kept.iter_mut() {
            entry.1 = ((entry.1.ln() - log_max) * inv_t).exp();
        }
        kept.retain(|e| e.1 > 0.0);
    }

    let z: f64 = kept.iter().map(|e| e.1).sum();
    for entry in kept.iter_mut() {
        entry.1 /= z;
    }
    Ok(kept)
}

/// A quantized next-token table: integer weights summing to `2^precision`,
/// every weight at least one, ordered by descending weight then ascending id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDistribution {
    entries: Vec<(TokenId, u64)>,
    cumulative: Vec<u64>,
    precision: u32,
}

impl TokenDistribution {
    /// Builds a table from explicit weights, which must sum to
    /// `2^precision` and be at least one each.
    pub fn from_weights(mut entries: Vec<(TokenId, u64)>, precision: u32) -> Result<Self> {
        if precision == 0 || precision > MAX_PRECISION {
            return Err(Error::InvalidParams(format!("precision {precision}")));
        }
        if entries.is_empty() {
            return Err(Error::InvalidDistribution("no entries".into()));
        }
        if entries.iter().any(|e| e.1 == 0) {
            return Err(Error::InvalidDistribution("zero-weight entry".into()));
        }
        sort_by_weight(&mut entries);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution("duplicate token".into()));
        }
        let mut cumulative = Vec::with_capacity(entries.len() + 1);
        let mut acc = 0u64;
        cumulative.push(0);
        for &(_, w) in &entries {
            acc += w;
            cumulative.push(acc);
        }
        if acc != 1u64 << precision {
            return Err(Error::InvalidDistribution(format!(
                "weights sum to {acc}, expected 2^{precision}"
            )));
        }
        Ok(Self {
            entries,
            cumulative,
            precision,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn total(&self) -> u64 {
        1u64 << self.precision
    }

    pub fn entries(&self) -> &[(TokenId, u64)] {
        &self.entries
    }

    pub fn token(&self, index: usize) -> TokenId {
        self.entries[index].0
    }

    pub fn weight(&self, index: usize) -> u64 {
        self.entries[index].1
    }

    /// Bin `[lower, upper)` of entry `index` on the `[0, 2^precision)` scale.
    pub fn bounds(&self, index: usize) -> (u64, u64) {
        (self.cumulative[index], self.cumulative[index + 1])
    }

    pub fn cumulative(&self) -> &[u64] {
        &self.cumulative
    }

    /// Entry whose bin contains `point` (taken modulo `2^precision`).
    pub fn index_at(&self, point: u64) -> usize {
        let point = point & (self.total() - 1);
        self.cumulative.partition_point(|&c| c <= point) - 1
    }

    pub fn index_of(&self, token: TokenId) -> Option<usize> {
        self.entries.iter().position(|e| e.0 == token)
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.entries[index].1 as f64 / self.total() as f64
    }

    /// `(token, weight / 2^precision)` pairs in table order.
    pub fn probabilities(&self) -> impl Iterator<Item = (TokenId, f64)> + '_ {
        let total = self.total() as f64;
        self.entries.iter().map(move |&(t, w)| (t, w as f64 / total))
    }

    /// Entropy of the quantized table in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.probabilities()
            .map(|(_, q)| if q > 0.0 { -q * q.log2() } else { 0.0 })
            .sum()
    }
}

/// Integer weights `max(1, round(p · 2^precision))`, corrected to sum exactly
/// to `2^precision` by adding or removing single units round-robin over the
/// entries in rank order (largest weight first, lowest id on ties).
pub fn quantize(dist: &[(TokenId, f64)], precision: u32) -> Result<TokenDistribution> {
    if precision == 0 || precision > MAX_PRECISION {
        return Err(Error::InvalidParams(format!("precision {precision}")));
    }
    let total = 1u64 << precision;
    if dist.is_empty() {
        return Err(Error::InvalidDistribution("no entries to quantize".into()));
    }
    if dist.len() as u64 > total {
        return Err(Error::CannotQuantize {
            tokens: dist.len(),
            precision,
        });
    }
    let mass: f64 = dist.iter().map(|e| e.1).sum();
    if !(mass.is_finite() && mass > 0.0) || dist.iter().any(|e| !(e.1 >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("total mass {mass}")));
    }

    let scale = total as f64 / mass;
    let mut entries: Vec<(TokenId, u64)> = dist
        .iter()
        .map(|&(t, p)| (t, ((p * scale).round() as u64).clamp(1, total)))
        .collect();
    sort_by_weight(&mut entries);

    let sum: u128 = entries.iter().map(|e| e.1 as u128).sum();
    if sum < total as u128 {
        let mut deficit = (total as u128 - sum) as u64;
        while deficit > 0 {
            for entry in entries.iter_mut() {
                if deficit == 0 {
                    break;
                }
                entry.1 += 1;
                deficit -= 1;
            }
        }
    } else if sum > total as u128 {
        let mut excess = (sum - total as u128) as u64;
        while excess > 0 {
            for entry in entries.iter_mut() {
                if excess == 0 {
                    break;
                }
                if entry.1 > 1 {
                    entry.1 -= 1;
                    excess -= 1;
                }
            }
        }
    }
    TokenDistribution::from_weights(entries, precision)
}

pub(crate) fn check_context(vocab: &Vocabulary, context: &[TokenId]) -> Result<()> {
    match context.iter().find(|&&t| t as usize >= vocab.len()) {
        Some(&t) => Err(Error::UnknownToken(t)),
        None => Ok(()),
    }
}

/// The coder's view of `model` after `context`:
/// `quantize(modulate(raw_distribution(context)))`.
pub fn next_distribution<M: LanguageModel + ?Sized>(
    model: &M,
    context: &[TokenId],
    params: &ModulationParams,
) -> Result<TokenDistribution> {
    step_distribution(model, context, params).map(|(_, dist)| dist)
}

/// [`next_distribution`] together with the raw vector it was derived from.
pub fn step_distribution<M: LanguageModel + ?Sized>(
    model: &M,
    context: &[TokenId],
    params: &ModulationParams,
) -> Result<(Vec<f64>, TokenDistribution)> {
    params.validate()?;
    check_context(model.vocabulary(), context)?;
    let raw = model.raw_distribution(context)?;
    if raw.len() != model.vocabulary().len() {
        return Err(Error::Model(format!(
            "distribution has {} entries for a vocabulary of {}",
            raw.len(),
            model.vocabulary().len()
        )));
    }
    let modulated = modulate(&raw, params)?;
    let dist = quantize(&modulated, params.precision)?;
    Ok((raw, dist))
}
