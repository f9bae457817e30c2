//! Add-α smoothed n-gram word model with suffix-truncation backoff.
//!
//! Each training document is framed as `BOS w1 .. wm EOS`. For every
//! predicted position the model counts the successor under every context
//! length from 0 up to `order - 1` (never reaching past BOS), so a query can
//! fall back to the longest suffix of its context that was seen in training.
//!
//! On-disk layout (little-endian):
//!
//! ```text
//! magic   "NGLM"
//! version u16
//! order   u32
//! alpha   f64
//! bos eos u32 u32
//! vocab   u32 count, then per entry: u32 byte length, UTF-8 bytes
//! tables  u32 count, then per context sorted by (length, ids):
//!         u32 length, u32 ids.., u32 successors, then (u32 id, u64 count)..
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::text::split_text;
use super::{LanguageModel, TokenId, Vocabulary};
use crate::error::{Error, Result};

pub const NGRAM_MAGIC: &[u8; 4] = b"NGLM";
pub const NGRAM_VERSION: u16 = 1;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Successors {
    total: u64,
    // sorted by token id
    counts: Vec<(TokenId, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    vocab: Vocabulary,
    tables: HashMap<Vec<TokenId>, Successors>,
}

impl NGramModel {
    /// Trains on running text, one document per non-empty line.
    pub fn train_text(corpus: &str, order: usize, alpha: f64) -> Result<Self> {
        Self::train(
            corpus
                .lines()
                .map(split_text)
                .filter(|doc| !doc.is_empty()),
            order,
            alpha,
        )
    }

    /// Trains on pre-tokenized documents.
    pub fn train<I, D, S>(documents: I, order: usize, alpha: f64) -> Result<Self>
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if order == 0 {
            return Err(Error::InvalidParams("n-gram order must be at least 1".into()));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParams(format!("smoothing alpha {alpha}")));
        }
        let mut vocab = Vocabulary::with_markers();
        let mut raw: HashMap<Vec<TokenId>, HashMap<TokenId, u64>> = HashMap::new();
        let mut seen_any = false;

        for doc in documents {
            let mut seq = vec![vocab.bos()];
            seq.extend(doc.into_iter().map(|w| vocab.intern(w.as_ref())));
            if seq.len() == 1 {
                continue;
            }
            seen_any = true;
            seq.push(vocab.eos());
            for i in 1..seq.len() {
                let max_len = (order - 1).min(i);
                for len in 0..=max_len {
                    *raw.entry(seq[i - len..i].to_vec())
                        .or_default()
                        .entry(seq[i])
                        .or_default() += 1;
                }
            }
        }
        if !seen_any {
            return Err(Error::EmptyCorpus);
        }

        let tables = raw
            .into_iter()
            .map(|(ctx, next)| {
                let mut counts: Vec<_> = next.into_iter().collect();
                counts.sort_unstable();
                let total = counts.iter().map(|c| c.1).sum();
                (ctx, Successors { total, counts })
            })
            .collect();
        Ok(Self {
            order,
            alpha,
            vocab,
            tables,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Longest suffix of `context` (at most `order - 1` tokens) with counts.
    fn lookup(&self, context: &[TokenId]) -> &Successors {
        let longest = (self.order - 1).min(context.len());
        for len in (0..=longest).rev() {
            if let Some(s) = self.tables.get(&context[context.len() - len..]) {
                return s;
            }
        }
        // the empty context is always present after training
        &self.tables[&[][..]]
    }

    /// Exact add-α probability of `token` after `context`.
    pub fn probability(&self, context: &[TokenId], token: TokenId) -> f64 {
        let s = self.lookup(context);
        let count = s
            .counts
            .binary_search_by_key(&token, |c| c.0)
            .map(|i| s.counts[i].1)
            .unwrap_or(0);
        let v = self.vocab.len() as f64;
        (count as f64 + self.alpha) / (s.total as f64 + self.alpha * v)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(NGRAM_MAGIC)?;
        w.write_u16::<LittleEndian>(NGRAM_VERSION)?;
        w.write_u32::<LittleEndian>(self.order as u32)?;
        w.write_f64::<LittleEndian>(self.alpha)?;
        w.write_u32::<LittleEndian>(self.vocab.bos())?;
        w.write_u32::<LittleEndian>(self.vocab.eos())?;
        w.write_u32::<LittleEndian>(self.vocab.len() as u32)?;
        for s in self.vocab.surfaces() {
            w.write_u32::<LittleEndian>(s.len() as u32)?;
            w.write_all(s.as_bytes())?;
        }
        let mut keys: Vec<&Vec<TokenId>> = self.tables.keys().collect();
        keys.sort_unstable_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        w.write_u32::<LittleEndian>(keys.len() as u32)?;
        for key in keys {
            w.write_u32::<LittleEndian>(key.len() as u32)?;
            for &t in key {
                w.write_u32::<LittleEndian>(t)?;
            }
            let s = &self.tables[key];
            w.write_u32::<LittleEndian>(s.counts.len() as u32)?;
            for &(t, c) in &s.counts {
                w.write_u32::<LittleEndian>(t)?;
                w.write_u64::<LittleEndian>(c)?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != NGRAM_MAGIC {
            return Err(Error::Format("bad magic, not an n-gram model file".into()));
        }
        let version = r.read_u16::<LittleEndian>()?;
        if version != NGRAM_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let order = r.read_u32::<LittleEndian>()? as usize;
        let alpha = r.read_f64::<LittleEndian>()?;
        if order == 0 || !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::Format(format!("order {order}, alpha {alpha}")));
        }
        let bos = r.read_u32::<LittleEndian>()?;
        let eos = r.read_u32::<LittleEndian>()?;
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut surfaces = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let mut bytes = vec![0u8; len];
            r.read_exact(&mut bytes)?;
            surfaces.push(
                String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?,
            );
        }
        let vocab = Vocabulary::from_surfaces(surfaces, bos, eos)
            .map_err(|e| Error::Format(e.to_string()))?;

        let n_tables = r.read_u32::<LittleEndian>()? as usize;
        let mut tables = HashMap::with_capacity(n_tables.min(1 << 20));
        for _ in 0..n_tables {
            let len = r.read_u32::<LittleEndian>()? as usize;
            let key = (0..len)
                .map(|_| r.read_u32::<LittleEndian>())
                .collect::<std::io::Result<Vec<_>>>()?;
            let m = r.read_u32::<LittleEndian>()? as usize;
            let mut counts = Vec::with_capacity(m.min(1 << 20));
            for _ in 0..m {
                let t = r.read_u32::<LittleEndian>()?;
                let c = r.read_u64::<LittleEndian>()?;
                if t as usize >= vocab.len() {
                    return Err(Error::Format(format!("successor id {t} out of range")));
                }
                counts.push((t, c));
            }
            if key.iter().any(|&t| t as usize >= vocab.len()) {
                return Err(Error::Format("context id out of range".into()));
            }
            counts.sort_unstable();
            let total = counts.iter().map(|c| c.1).sum();
            tables.insert(key, Successors { total, counts });
        }
        if !tables.contains_key(&[][..]) {
            return Err(Error::Format("missing unigram table".into()));
        }
        Ok(Self {
            order,
            alpha,
            vocab,
            tables,
        })
    }
}

impl LanguageModel for NGramModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn raw_distribution(&self, context: &[TokenId]) -> Result<Vec<f64>> {
        let s = self.lookup(context);
        let v = self.vocab.len();
        let denom = s.total as f64 + self.alpha * v as f64;
        if denom <= 0.0 {
            return Err(Error::Model("context has no mass".into()));
        }
        let base = self.alpha / denom;
        let mut probs = vec![base; v];
        for &(t, c) in &s.counts {
            probs[t as usize] = (c as f64 + self.alpha) / denom;
        }
        Ok(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::{next_distribution, ModulationParams, BOS, EOS};

    #[test]
    fn unigram_of_repeated_word() {
        let m = NGramModel::train_text("a a a", 1, 0.0).unwrap();
        let a = m.vocabulary().id("a").unwrap();
        let p = m.raw_distribution(&[BOS]).unwrap();
        // three `a` and one EOS are predicted; among words `a` has all mass
        assert_eq!(p[a as usize], 0.75);
        assert_eq!(p[EOS as usize], 0.25);
        let words: f64 = (2..p.len()).map(|i| p[i]).sum();
        assert_eq!(p[a as usize] / words, 1.0);
    }

    #[test]
    fn bigram_single_successor() {
        let m = NGramModel::train_text("a b", 2, 0.0).unwrap();
        let a = m.vocabulary().id("a").unwrap();
        let b = m.vocabulary().id("b").unwrap();
        assert_eq!(m.probability(&[a], b), 1.0);
    }

    #[test]
    fn add_alpha_hand_count() {
        let m = NGramModel::train_text("a b a c", 2, 1.0).unwrap();
        let v = m.vocabulary();
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        // `a` is followed once by `b` and once by `c`; |V| = {<s>, </s>, a, b, c}
        assert_eq!(v.len(), 5);
        let expected = (1.0 + 1.0) / (2.0 + 5.0);
        assert!((m.probability(&[a], b) - expected).abs() < 1e-15);
        let p = m.raw_distribution(&[a]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn backs_off_to_seen_suffix() {
        let m = NGramModel::train_text("x y z\nq y w", 3, 0.0).unwrap();
        let v = m.vocabulary();
        let (x, y, z, w) = (
            v.id("x").unwrap(),
            v.id("y").unwrap(),
            v.id("z").unwrap(),
            v.id("w").unwrap(),
        );
        assert_eq!(m.probability(&[x, y], z), 1.0);
        // (w, y) unseen: falls back to (y) which saw z and w once each
        assert_eq!(m.probability(&[w, y], z), 0.5);
        // (z, </s>) and (</s>) never occur as contexts: unigram
        let uni = m.probability(&[z, EOS], y);
        assert!((uni - 2.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn near_deterministic_successor() {
        let m = NGramModel::train_text("a b a b a b", 2, 1e-9).unwrap();
        let v = m.vocabulary();
        let (a, b) = (v.id("a").unwrap(), v.id("b").unwrap());
        let d = next_distribution(&m, &[a], &ModulationParams::unmodulated()).unwrap();
        assert_eq!(d.token(0), b);
        assert!(d.weight(0) as f64 >= d.total() as f64 * (1.0 - 1e-6));
    }

    #[test]
    fn empty_corpus_and_bad_params() {
        assert!(matches!(
            NGramModel::train_text("\n  \n", 2, 1.0),
            Err(Error::EmptyCorpus)
        ));
        assert!(NGramModel::train_text("a", 0, 1.0).is_err());
        assert!(NGramModel::train_text("a", 1, -1.0).is_err());
    }

    #[test]
    fn serialization_roundtrip() {
        let m = NGramModel::train_text("the cat sat .\nthe dog ran .", 3, 0.1).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(&bytes[..4], NGRAM_MAGIC);
        let back = NGramModel::read_from(&bytes[..]).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(NGramModel::read_from(&bad[..]), Err(Error::Format(_))));
        assert!(NGramModel::read_from(&bytes[..bytes.len() - 3]).is_err());
    }
}
