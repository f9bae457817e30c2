use std::collections::HashMap;

use num_rational::Ratio;

use super::{check_context, LanguageModel, TokenId, Vocabulary};
use crate::error::{Error, Result};

pub type Prob = Ratio<u64>;

/// Hand-specified model: explicit rational distributions keyed by context.
///
/// A query uses the entry of the longest suffix of its context present in
/// the table; the empty context must be present as the fallback.
#[derive(Debug, Clone)]
pub struct ToyModel {
    vocab: Vocabulary,
    table: HashMap<Vec<TokenId>, Vec<(TokenId, Prob)>>,
    longest: usize,
}

impl ToyModel {
    /// Builds a model from word-level rows. Words are interned in order of
    /// first appearance after the two markers; `"<s>"` and `"</s>"` refer to
    /// the markers.
    pub fn from_rows(rows: &[(&[&str], &[(&str, u64, u64)])]) -> Result<Self> {
        let mut vocab = Vocabulary::with_markers();
        let mut table = HashMap::new();
        for (ctx, dist) in rows {
            let key: Vec<TokenId> = ctx.iter().map(|w| vocab.intern(w)).collect();
            let row: Vec<(TokenId, Prob)> = dist
                .iter()
                .map(|&(w, num, den)| (vocab.intern(w), Prob::new(num, den)))
                .collect();
            if table.insert(key, row).is_some() {
                return Err(Error::Model(format!("duplicate context {ctx:?}")));
            }
        }
        Self::new(vocab, table)
    }

    pub fn new(vocab: Vocabulary, table: HashMap<Vec<TokenId>, Vec<(TokenId, Prob)>>) -> Result<Self> {
        if !table.contains_key(&[][..]) {
            return Err(Error::Model("toy model needs an empty-context row".into()));
        }
        for (ctx, row) in &table {
            check_context(&vocab, ctx)?;
            check_context(&vocab, &row.iter().map(|e| e.0).collect::<Vec<_>>())?;
            let sum = row.iter().fold(Prob::from_integer(0), |acc, e| acc + e.1);
            if sum != Prob::from_integer(1) {
                return Err(Error::Model(format!(
                    "row for context {ctx:?} sums to {sum}, not 1"
                )));
            }
        }
        let longest = table.keys().map(Vec::len).max().unwrap_or(0);
        Ok(Self {
            vocab,
            table,
            longest,
        })
    }

    /// The same distribution at every step, over words `t0, t1, ...`.
    pub fn iid(probs: &[(u64, u64)]) -> Result<Self> {
        let names: Vec<String> = (0..probs.len()).map(|i| format!("t{i}")).collect();
        let row: Vec<(&str, u64, u64)> = names
            .iter()
            .zip(probs)
            .map(|(n, &(a, b))| (n.as_str(), a, b))
            .collect();
        Self::from_rows(&[(&[], &row)])
    }

    /// A small "Once upon a time" model: after `Once`, `upon` and `I` are
    /// the only continuations, each with probability one half.
    pub fn once_upon_a_time() -> Self {
        Self::from_rows(&[
            (&["<s>"], &[("Once", 1, 2), ("There", 1, 4), ("I", 1, 4)]),
            (&["Once"], &[("upon", 1, 2), ("I", 1, 2)]),
            (&["upon"], &[("a", 3, 4), ("the", 1, 4)]),
            (&["a"], &[("time", 1, 2), ("king", 1, 4), ("frog", 1, 4)]),
            (&["I"], &[("was", 1, 2), ("saw", 1, 4), ("</s>", 1, 4)]),
            (&["There"], &[("was", 3, 4), ("lived", 1, 4)]),
            (
                &[],
                &[
                    ("the", 1, 4),
                    ("a", 1, 4),
                    ("was", 1, 8),
                    ("there", 1, 8),
                    (".", 1, 8),
                    ("</s>", 1, 8),
                ],
            ),
        ])
        .expect("built-in toy table is well formed")
    }

    /// Exact distribution after `context`.
    pub fn row(&self, context: &[TokenId]) -> &[(TokenId, Prob)] {
        let longest = self.longest.min(context.len());
        for len in (0..=longest).rev() {
            if let Some(row) = self.table.get(&context[context.len() - len..]) {
                return row;
            }
        }
        &self.table[&[][..]]
    }
}

impl LanguageModel for ToyModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn raw_distribution(&self, context: &[TokenId]) -> Result<Vec<f64>> {
        let mut probs = vec![0.0; self.vocab.len()];
        for &(t, p) in self.row(context) {
            probs[t as usize] += *p.numer() as f64 / *p.denom() as f64;
        }
        Ok(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probmodel::{next_distribution, ModulationParams, BOS};

    #[test]
    fn once_is_followed_by_upon_or_i_evenly() {
        let m = ToyModel::once_upon_a_time();
        let v = m.vocabulary();
        let once = v.id("Once").unwrap();
        let params = ModulationParams::unmodulated();
        let d = next_distribution(&m, &[BOS, once], &params).unwrap();
        let half = 1u64 << (params.precision - 1);
        let mut got: Vec<_> = d
            .entries()
            .iter()
            .map(|&(t, w)| (v.surface(t).unwrap(), w))
            .collect();
        got.sort();
        assert_eq!(got, vec![("I", half), ("upon", half)]);
    }

    #[test]
    fn rows_must_sum_to_one() {
        let err = ToyModel::from_rows(&[(&[], &[("a", 1, 2), ("b", 1, 3)])]);
        assert!(err.is_err());
        let err = ToyModel::from_rows(&[(&["a"], &[("a", 1, 1)])]);
        assert!(err.is_err(), "missing fallback row");
    }

    #[test]
    fn purity() {
        let m = ToyModel::once_upon_a_time();
        let ctx = [BOS, m.vocabulary().id("Once").unwrap()];
        let p = ModulationParams::unmodulated();
        assert_eq!(
            next_distribution(&m, &ctx, &p).unwrap(),
            next_distribution(&m, &ctx, &p).unwrap()
        );
    }
}
