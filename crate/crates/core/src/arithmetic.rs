//! Fixed-precision arithmetic coding run in reverse: message bits choose
//! tokens.
//!
//! The message, followed by the alternating pad, is read as a binary
//! fraction in `[0, 1)`. Each step splits the live interval in proportion to
//! the quantized next-token table and emits the token whose bin holds the
//! message point. Leading bits on which the whole interval agrees are settled
//! and shifted out; encoding stops once every framed bit is settled, which is
//! exactly when the receiver can read them back.
//!
//! The interval register is `precision + 2` bits wide. Renormalization keeps
//! its width above a quarter of the register, i.e. above `2^precision`, so
//! every bin of weight one still maps to a non-empty integer range.

use crate::bits::{padded_bit, BitMessage, HEADER_BITS};
use crate::error::{Error, Result};
use crate::probmodel::{
    check_context, step_distribution, LanguageModel, ModulationParams, TokenDistribution, TokenId,
};

/// Token budget used when the caller does not give one.
pub fn default_max_tokens(framed_bits: usize) -> usize {
    4 * framed_bits + 64
}

/// Generated tokens plus the context they continue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverText {
    pub context: Vec<TokenId>,
    pub tokens: Vec<TokenId>,
}

impl CoverText {
    pub fn new(context: Vec<TokenId>, tokens: Vec<TokenId>) -> Self {
        Self { context, tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// One decimal id per line.
    pub fn to_id_lines(&self) -> String {
        self.tokens.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn parse_id_lines(context: Vec<TokenId>, text: &str) -> Result<Self> {
        let tokens = text
            .split_whitespace()
            .map(|s| {
                s.parse::<TokenId>()
                    .map_err(|_| Error::MalformedStream(format!("not a token id: {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { context, tokens })
    }
}

/// How the leading bits of the interval were resolved by one shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shift {
    /// Whole interval below one half.
    Zero,
    /// Whole interval at or above one half.
    One,
    /// Interval inside the middle half; the next bit is pending.
    Straddle,
}

/// Live coder interval `[low, high)` on a `precision + 2` bit register.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalState {
    low: u128,
    high: u128,
    pending: u64,
    precision: u32,
    consumed_bits: usize,
}

impl IntervalState {
    pub fn new(precision: u32) -> Self {
        let mut s = Self {
            low: 0,
            high: 0,
            pending: 0,
            precision,
            consumed_bits: 0,
        };
        s.high = s.full();
        s
    }

    #[inline]
    fn register_bits(&self) -> u32 {
        self.precision + 2
    }

    #[inline]
    fn full(&self) -> u128 {
        1u128 << self.register_bits()
    }

    #[inline]
    fn half(&self) -> u128 {
        self.full() >> 1
    }

    #[inline]
    fn quarter(&self) -> u128 {
        self.full() >> 2
    }

    pub fn low(&self) -> u128 {
        self.low
    }

    /// Exclusive upper end.
    pub fn high(&self) -> u128 {
        self.high
    }

    pub fn pending(&self) -> u64 {
        self.pending
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    /// Message bits settled so far.
    pub fn consumed_bits(&self) -> usize {
        self.consumed_bits
    }

    /// Width invariant that holds between steps.
    pub fn is_normalized(&self) -> bool {
        self.low < self.high
            && self.high <= self.full()
            && self.high - self.low > self.quarter()
            && self.low < self.half()
            && self.high > self.half()
    }

    /// Register position of cumulative weight `c`.
    #[inline]
    fn scaled(&self, c: u64) -> u128 {
        self.low + (((self.high - self.low) * c as u128) >> self.precision)
    }

    fn check_precision(&self, dist: &TokenDistribution) -> Result<()> {
        if dist.precision() != self.precision {
            return Err(Error::InvalidParams(format!(
                "distribution precision {} does not match coder precision {}",
                dist.precision(),
                self.precision
            )));
        }
        Ok(())
    }

    /// Register range of entry `index` of `dist`.
    pub fn bin(&self, dist: &TokenDistribution, index: usize) -> (u128, u128) {
        let (lo, hi) = dist.bounds(index);
        (self.scaled(lo), self.scaled(hi))
    }

    /// Index of the bin containing register value `value`.
    fn locate(&self, dist: &TokenDistribution, value: u128) -> usize {
        dist.cumulative()[1..].partition_point(|&c| self.scaled(c) <= value)
    }

    fn narrow(&mut self, dist: &TokenDistribution, index: usize) {
        let (lo, hi) = self.bin(dist, index);
        debug_assert!(lo < hi, "empty bin");
        self.low = lo;
        self.high = hi;
    }

    /// Shifts out settled leading bits, reporting each shift to `on_shift`
    /// and each settled bit to `on_bit`.
    fn renormalize(&mut self, mut on_shift: impl FnMut(Shift, u128), mut on_bit: impl FnMut(bool)) {
        let (half, quarter) = (self.half(), self.quarter());
        loop {
            let (shift, offset) = if self.high <= half {
                (Shift::Zero, 0)
            } else if self.low >= half {
                (Shift::One, half)
            } else if self.low >= quarter && self.high <= half + quarter {
                (Shift::Straddle, quarter)
            } else {
                break;
            };
            match shift {
                Shift::Zero | Shift::One => {
                    let bit = shift == Shift::One;
                    on_bit(bit);
                    for _ in 0..self.pending {
                        on_bit(!bit);
                    }
                    self.consumed_bits += 1 + self.pending as usize;
                    self.pending = 0;
                }
                Shift::Straddle => self.pending += 1,
            }
            self.low = (self.low - offset) << 1;
            self.high = (self.high - offset) << 1;
            on_shift(shift, offset);
        }
    }
}

/// How a [`PointReader`] extends a finite bit string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuation {
    /// Alternating pad bits 1, 0, 1, 0, ...
    Pad,
    /// Unknown: every continuation is tracked and any token choice that
    /// depends on it is an error.
    Strict,
}

/// The message point as seen through the coder register. `lo` and `hi`
/// bound every continuation of the bits read so far.
struct PointReader<'a> {
    bits: &'a [bool],
    next: usize,
    lo: u128,
    hi: u128,
    mode: Continuation,
}

impl<'a> PointReader<'a> {
    fn new(bits: &'a [bool], register_bits: u32, mode: Continuation) -> Self {
        let mut r = Self {
            bits,
            next: 0,
            lo: 0,
            hi: 0,
            mode,
        };
        for _ in 0..register_bits {
            r.push_bit();
        }
        r
    }

    fn push_bit(&mut self) {
        let i = self.next;
        self.next += 1;
        let (a, b) = match (self.bits.get(i), self.mode) {
            (Some(&bit), _) => (bit, bit),
            (None, Continuation::Pad) => {
                let p = padded_bit(self.bits, i);
                (p, p)
            }
            (None, Continuation::Strict) => (false, true),
        };
        self.lo = (self.lo << 1) | a as u128;
        self.hi = (self.hi << 1) | b as u128;
    }

    fn shift(&mut self, offset: u128) {
        self.lo -= offset;
        self.hi -= offset;
        self.push_bit();
    }
}

/// Bits → tokens, one step at a time, for any sequence of distributions.
pub struct StreamEncoder<'a> {
    state: IntervalState,
    reader: PointReader<'a>,
}

impl<'a> StreamEncoder<'a> {
    pub fn new(bits: &'a [bool], precision: u32, mode: Continuation) -> Self {
        let state = IntervalState::new(precision);
        let reader = PointReader::new(bits, state.register_bits(), mode);
        Self { state, reader }
    }

    pub fn state(&self) -> &IntervalState {
        &self.state
    }

    pub fn consumed_bits(&self) -> usize {
        self.state.consumed_bits
    }

    /// Chooses the entry of `dist` whose bin holds the message point and
    /// narrows to it. Returns the entry index.
    pub fn step(&mut self, dist: &TokenDistribution) -> Result<usize> {
        self.state.check_precision(dist)?;
        let index = self.state.locate(dist, self.reader.lo);
        if self.reader.mode == Continuation::Strict
            && self.state.locate(dist, self.reader.hi) != index
        {
            return Err(Error::MalformedStream(
                "bit stream ends before the next token is determined".into(),
            ));
        }
        self.state.narrow(dist, index);
        let reader = &mut self.reader;
        self.state.renormalize(|_, offset| reader.shift(offset), |_| {});
        debug_assert!(self.state.is_normalized());
        Ok(index)
    }
}

/// Tokens → bits: replays the narrowing and collects settled bits.
#[derive(Debug, Clone)]
pub struct StreamDecoder {
    state: IntervalState,
    bits: Vec<bool>,
}

impl StreamDecoder {
    pub fn new(precision: u32) -> Self {
        Self {
            state: IntervalState::new(precision),
            bits: Vec::new(),
        }
    }

    pub fn state(&self) -> &IntervalState {
        &self.state
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    /// Narrows to entry `index`; returns the number of newly settled bits.
    pub fn step(&mut self, dist: &TokenDistribution, index: usize) -> Result<usize> {
        self.state.check_precision(dist)?;
        if index >= dist.len() {
            return Err(Error::InvalidParams(format!("entry {index} out of range")));
        }
        let before = self.bits.len();
        self.state.narrow(dist, index);
        let bits = &mut self.bits;
        self.state.renormalize(|_, _| {}, |b| bits.push(b));
        Ok(self.bits.len() - before)
    }

    /// Appends the shortest suffix that pins the final interval regardless of
    /// what follows it, and returns every bit.
    ///
    /// The suffix pins the second or third quarter of the register. When both
    /// fit, the one holding more of the interval wins, so the choice is
    /// symmetric under reflecting the interval.
    pub fn finish(mut self) -> Vec<bool> {
        let (low, high) = (self.state.low, self.state.high);
        let quarter = self.state.quarter();
        let first = if low > quarter {
            true
        } else if high < 3 * quarter {
            false
        } else {
            low + high > self.state.full()
        };
        self.bits.push(first);
        for _ in 0..self.state.pending {
            self.bits.push(!first);
        }
        self.bits.push(!first);
        self.bits
    }
}

/// One generation step, as reported to encode observers.
#[derive(Debug)]
pub struct StepRecord<'a> {
    pub raw: &'a [f64],
    pub dist: &'a TokenDistribution,
    pub index: usize,
    pub token: TokenId,
    /// Message bits settled by this step.
    pub settled_bits: usize,
}

/// Encodes raw `bits` (no header) as tokens after `context`, stopping as
/// soon as every bit is settled.
pub fn encode_bits<M: LanguageModel + ?Sized>(
    bits: &[bool],
    context: &[TokenId],
    model: &M,
    params: &ModulationParams,
    max_tokens: usize,
) -> Result<CoverText> {
    encode_bits_observed(bits, context, model, params, max_tokens, |_| {})
}

/// [`encode_bits`] reporting every step to `observe`.
pub fn encode_bits_observed<M: LanguageModel + ?Sized>(
    bits: &[bool],
    context: &[TokenId],
    model: &M,
    params: &ModulationParams,
    max_tokens: usize,
    mut observe: impl FnMut(&StepRecord<'_>),
) -> Result<CoverText> {
    params.validate()?;
    check_context(model.vocabulary(), context)?;
    let mut encoder = StreamEncoder::new(bits, params.precision, Continuation::Pad);
    let mut ctx = context.to_vec();
    let mut tokens = Vec::new();
    while encoder.consumed_bits() < bits.len() {
        if tokens.len() >= max_tokens {
            return Err(Error::MessageTooLong {
                tokens_emitted: tokens.len(),
                consumed_bits: encoder.consumed_bits(),
                needed_bits: bits.len(),
                partial: tokens,
            });
        }
        let (raw, dist) = step_distribution(model, &ctx, params)?;
        let before = encoder.consumed_bits();
        let index = encoder.step(&dist)?;
        let token = dist.token(index);
        observe(&StepRecord {
            raw: &raw,
            dist: &dist,
            index,
            token,
            settled_bits: encoder.consumed_bits() - before,
        });
        tokens.push(token);
        ctx.push(token);
    }
    Ok(CoverText::new(context.to_vec(), tokens))
}

/// Replays `cover` and returns every bit it settles.
pub fn decode_bits<M: LanguageModel + ?Sized>(
    cover: &CoverText,
    model: &M,
    params: &ModulationParams,
    mut enough: impl FnMut(&[bool]) -> bool,
) -> Result<Vec<bool>> {
    params.validate()?;
    check_context(model.vocabulary(), &cover.context)?;
    let mut decoder = StreamDecoder::new(params.precision);
    let mut ctx = cover.context.clone();
    for (step, &token) in cover.tokens.iter().enumerate() {
        if enough(decoder.bits()) {
            break;
        }
        let (_, dist) = step_distribution(model, &ctx, params)?;
        let index = dist.index_of(token).ok_or(Error::Desync {
            step,
            token,
            reason: "is outside the support of its step",
        })?;
        decoder.step(&dist, index)?;
        ctx.push(token);
    }
    Ok(decoder.into_bits())
}

/// Hides `message` (with its length header) in tokens continuing `context`.
pub fn encode<M: LanguageModel + ?Sized>(
    message: &BitMessage,
    context: &[TokenId],
    model: &M,
    params: &ModulationParams,
    max_tokens: Option<usize>,
) -> Result<CoverText> {
    let framed = message.framed();
    let budget = max_tokens.unwrap_or_else(|| default_max_tokens(framed.len()));
    encode_bits(&framed, context, model, params, budget)
}

/// Recovers the message hidden in `cover`.
pub fn decode<M: LanguageModel + ?Sized>(
    cover: &CoverText,
    model: &M,
    params: &ModulationParams,
) -> Result<BitMessage> {
    let bits = decode_bits(cover, model, params, |bits| {
        BitMessage::announced_len(bits).is_some_and(|n| bits.len() >= HEADER_BITS + n)
    })?;
    BitMessage::unframe(&bits)
}
