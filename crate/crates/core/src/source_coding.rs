//! Natural-language messages ↔ near-uniform bits, and the full hide/reveal
//! pipeline built on top of it.
//!
//! Compression runs ordinary arithmetic coding over the message tokens from
//! the model's empty context; decompression reads the bits back as a point
//! and stops at the end-of-sequence token. The compressed bits are then
//! framed and hidden with [`crate::arithmetic::encode`] after a separate
//! cover context.

use crate::arithmetic::{self, Continuation, CoverText, StreamDecoder, StreamEncoder};
use crate::bits::BitMessage;
use crate::error::{Error, Result};
use crate::probmodel::{next_distribution, LanguageModel, ModulationParams, TokenId};

/// Tokens of a message, terminated by exactly one end-of-sequence token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextMessage {
    tokens: Vec<TokenId>,
}

impl TextMessage {
    pub fn new(tokens: Vec<TokenId>, eos: TokenId) -> Result<Self> {
        match tokens.iter().position(|&t| t == eos) {
            Some(i) if i + 1 == tokens.len() => Ok(Self { tokens }),
            _ => Err(Error::MalformedStream(
                "a text message needs exactly one end token, at the end".into(),
            )),
        }
    }

    /// Tokenizes `text` with the model's tokenizer and appends the end token.
    pub fn from_text<M: LanguageModel + ?Sized>(model: &M, text: &str) -> Result<Self> {
        let mut tokens = model.tokenize(text)?;
        tokens.push(model.vocabulary().eos());
        Self::new(tokens, model.vocabulary().eos())
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    /// Tokens without the trailing end token.
    pub fn body(&self) -> &[TokenId] {
        &self.tokens[..self.tokens.len() - 1]
    }

    pub fn to_text<M: LanguageModel + ?Sized>(&self, model: &M) -> Result<String> {
        model.detokenize(self.body())
    }
}

/// Compresses `message` against `model` from its empty context.
///
/// The end-token-only message maps to the empty bit string; every other
/// message yields at least two bits.
pub fn text_to_bits<M: LanguageModel + ?Sized>(
    message: &TextMessage,
    model: &M,
    params: &ModulationParams,
) -> Result<Vec<bool>> {
    if message.tokens.len() == 1 {
        return Ok(Vec::new());
    }
    let mut decoder = StreamDecoder::new(params.precision);
    let mut ctx = model.empty_context();
    for (step, &token) in message.tokens.iter().enumerate() {
        let dist = next_distribution(model, &ctx, params)?;
        let index = dist
            .index_of(token)
            .ok_or(Error::UnsupportedToken { step, token })?;
        decoder.step(&dist, index)?;
        ctx.push(token);
    }
    Ok(decoder.finish())
}

/// Token bound for [`bits_to_text`] when none is given.
pub fn default_text_bound(bits: usize) -> usize {
    8 * bits + 64
}

/// Inverse of [`text_to_bits`]. Fails if any token choice depends on bits
/// past the end of `bits`, or if no end token appears within `max_tokens`.
pub fn bits_to_text<M: LanguageModel + ?Sized>(
    bits: &[bool],
    model: &M,
    params: &ModulationParams,
    max_tokens: Option<usize>,
) -> Result<TextMessage> {
    let eos = model.vocabulary().eos();
    if bits.is_empty() {
        return TextMessage::new(vec![eos], eos);
    }
    params.validate()?;
    let bound = max_tokens.unwrap_or_else(|| default_text_bound(bits.len()));
    let mut encoder = StreamEncoder::new(bits, params.precision, Continuation::Strict);
    let mut ctx = model.empty_context();
    let mut tokens = Vec::new();
    loop {
        if tokens.len() >= bound {
            return Err(Error::MalformedStream(format!(
                "no end token within {bound} tokens"
            )));
        }
        let dist = next_distribution(model, &ctx, params)?;
        let token = dist.token(encoder.step(&dist)?);
        tokens.push(token);
        if token == eos {
            return TextMessage::new(tokens, eos);
        }
        ctx.push(token);
    }
}

/// Compresses `message` and hides the framed bits after `cover_context`.
pub fn hide<M: LanguageModel + ?Sized>(
    message: &TextMessage,
    cover_context: &[TokenId],
    model: &M,
    source_params: &ModulationParams,
    cover_params: &ModulationParams,
    max_tokens: Option<usize>,
) -> Result<CoverText> {
    let bits = text_to_bits(message, model, source_params)?;
    arithmetic::encode(
        &BitMessage::new(bits),
        cover_context,
        model,
        cover_params,
        max_tokens,
    )
}

/// Recovers the message text hidden by [`hide`].
pub fn reveal<M: LanguageModel + ?Sized>(
    cover: &CoverText,
    model: &M,
    source_params: &ModulationParams,
    cover_params: &ModulationParams,
) -> Result<TextMessage> {
    let bits = arithmetic::decode(cover, model, cover_params)?;
    bits_to_text(bits.payload(), model, source_params, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::{NGramModel, ToyModel};

    fn corpus_model() -> NGramModel {
        NGramModel::train_text(
            "the cat sat on the mat .\nthe dog sat on the log .\na cat saw a dog .",
            2,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn text_roundtrip() {
        let m = corpus_model();
        let p = ModulationParams::unmodulated();
        for text in ["the cat sat on the log .", "a dog saw the mat .", "mat mat mat"] {
            let msg = TextMessage::from_text(&m, text).unwrap();
            let bits = text_to_bits(&msg, &m, &p).unwrap();
            assert!(bits.len() >= 2);
            assert_eq!(bits_to_text(&bits, &m, &p, None).unwrap(), msg);
        }
    }

    #[test]
    fn uniform_binary_model_is_one_bit_per_token() {
        // fair coin between </s> (id 1, first on ties) and t0 (id 2)
        let m = ToyModel::from_rows(&[(&[], &[("t0", 1, 2), ("</s>", 1, 2)])]).unwrap();
        let p = ModulationParams::unmodulated();
        let t0 = m.vocabulary().id("t0").unwrap();
        let msg = TextMessage::new(vec![t0, t0, t0, 1], 1).unwrap();
        let bits = text_to_bits(&msg, &m, &p).unwrap();
        // four settled bits, then a flush of at most a couple of bits
        assert!(bits.len() >= 4 && bits.len() <= 4 + 3, "{}", bits.len());
        assert_eq!(&bits[..4], &[true, true, true, false]);
        assert_eq!(bits_to_text(&bits, &m, &p, None).unwrap(), msg);
    }

    #[test]
    fn eos_only_message_is_empty() {
        let m = corpus_model();
        let p = ModulationParams::unmodulated();
        let msg = TextMessage::from_text(&m, "").unwrap();
        assert!(text_to_bits(&msg, &m, &p).unwrap().is_empty());
        assert_eq!(bits_to_text(&[], &m, &p, None).unwrap(), msg);
    }

    #[test]
    fn truncated_stream_is_malformed() {
        let m = corpus_model();
        let p = ModulationParams::unmodulated();
        let msg = TextMessage::from_text(&m, "the dog sat on the mat . a cat saw the log .").unwrap();
        let bits = text_to_bits(&msg, &m, &p).unwrap();
        let cut = &bits[..bits.len() / 2];
        assert!(matches!(
            bits_to_text(cut, &m, &p, None),
            Err(Error::MalformedStream(_))
        ));
    }

    #[test]
    fn message_validation() {
        assert!(TextMessage::new(vec![3, 4], 1).is_err());
        assert!(TextMessage::new(vec![1, 3, 1], 1).is_err());
        assert!(TextMessage::new(vec![3, 1], 1).is_ok());
    }

    #[test]
    fn unsupported_token_under_truncation() {
        let m = corpus_model();
        let p = ModulationParams::new(1.0, Some(1), 32).unwrap();
        let msg = TextMessage::from_text(&m, "mat mat").unwrap();
        assert!(matches!(
            text_to_bits(&msg, &m, &p),
            Err(Error::UnsupportedToken { .. })
        ));
    }

    #[test]
    fn hide_reveal() {
        let m = corpus_model();
        let src = ModulationParams::unmodulated();
        let cov = ModulationParams::new(0.8, Some(5), 32).unwrap();
        let msg = TextMessage::from_text(&m, "a cat sat on the log .").unwrap();
        let ctx = m.tokenize("the dog").unwrap();
        let cover = hide(&msg, &ctx, &m, &src, &cov, None).unwrap();
        assert_eq!(reveal(&cover, &m, &src, &cov).unwrap(), msg);
    }
}
