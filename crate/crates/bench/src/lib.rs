//! Shared inputs for the benchmarks in `benches/`.

use lmstego::{corpus, BitMessage, LanguageModel, NGramModel, TokenId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn model() -> NGramModel {
    corpus::builtin_model()
}

/// A reproducible payload of `len` bits.
pub fn payload(len: usize, seed: u64) -> BitMessage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    BitMessage::new((0..len).map(|_| rng.gen()).collect())
}

/// Cover context made from the opening words of a corpus sentence.
pub fn context(model: &NGramModel) -> Vec<TokenId> {
    let mut ctx = model.empty_context();
    ctx.extend(model.tokenize("The committee said on Monday").unwrap());
    ctx
}
