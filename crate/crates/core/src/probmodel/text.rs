//! Whitespace word tokenization for the built-in word models.
//!
//! Sentence punctuation is split off into its own token so that "end." and
//! "end ." tokenize identically; detokenization glues it back on.

use super::{TokenId, Vocabulary};
use crate::error::{Error, Result};

const PUNCT: &[char] = &['.', ',', '!', '?', ';', ':'];

fn split_word(word: &str, out: &mut Vec<String>) {
    let core = word.trim_end_matches(PUNCT);
    if !core.is_empty() {
        out.push(core.to_owned());
    }
    for c in word[core.len()..].chars() {
        out.push(c.to_string());
    }
}

/// Splits `text` into word and punctuation strings without a vocabulary.
pub fn split_text(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for word in text.split_whitespace() {
        split_word(word, &mut out);
    }
    out
}

pub fn tokenize_words(vocab: &Vocabulary, text: &str) -> Result<Vec<TokenId>> {
    split_text(text)
        .into_iter()
        .map(|w| vocab.id(&w).ok_or(Error::UnknownWord(w)))
        .collect()
}

/// Joins words with single spaces, attaching punctuation to the preceding
/// word.
pub fn join_words<'a>(words: impl IntoIterator<Item = &'a str>) -> String {
    let mut out = String::new();
    for s in words {
        let is_punct = s.chars().count() == 1 && s.starts_with(PUNCT);
        if !out.is_empty() && !is_punct {
            out.push(' ');
        }
        out.push_str(s);
    }
    out
}

/// [`join_words`] over the surfaces of `ids`; marker tokens are dropped.
pub fn detokenize_words(vocab: &Vocabulary, ids: &[TokenId]) -> Result<String> {
    let words = ids
        .iter()
        .filter(|&&id| !vocab.is_marker(id))
        .map(|&id| vocab.surface(id).ok_or(Error::UnknownToken(id)))
        .collect::<Result<Vec<_>>>()?;
    Ok(join_words(words))
}
