//! Per-step Huffman coding over the truncated next-token distribution.
//!
//! Tree construction is fully determined so both sides rebuild the same
//! codes: the two lowest-probability nodes are merged first (on equal
//! probability the node with the larger smallest-token-id goes first), and
//! within a merge the more probable child takes bit 0, the one containing the
//! smaller token id winning ties.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::arithmetic::{default_max_tokens, CoverText};
use crate::bits::{padded_bit, BitMessage, HEADER_BITS};
use crate::error::{Error, Result};
use crate::probmodel::{check_context, check_probabilities, top_k, LanguageModel, TokenId};

#[derive(Debug, Clone)]
enum Node {
    Leaf(TokenId),
    Branch([usize; 2]),
}

/// Prefix code over the top-`truncation` tokens of one step.
#[derive(Debug, Clone)]
pub struct HuffmanTree {
    nodes: Vec<Node>,
    root: usize,
    codes: Vec<(TokenId, Vec<bool>)>,
}

#[derive(Debug, PartialEq)]
struct HeapItem {
    prob: f64,
    min_id: TokenId,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    // BinaryHeap is a max-heap: the "greatest" item is the lowest probability,
    // and among equals the one with the larger min id.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .prob
            .partial_cmp(&self.prob)
            .unwrap_or(Ordering::Equal)
            .then(self.min_id.cmp(&other.min_id))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl HuffmanTree {
    /// Builds the code over the `truncation` most probable supported tokens
    /// of `raw`, renormalized.
    pub fn build(raw: &[f64], truncation: usize) -> Result<Self> {
        if truncation < 2 {
            return Err(Error::InvalidParams(format!(
                "Huffman truncation must be at least 2, got {truncation}"
            )));
        }
        let leaves = top_k(raw, Some(truncation));
        if leaves.is_empty() {
            return Err(Error::InvalidDistribution("no supported tokens".into()));
        }
        let z: f64 = leaves.iter().map(|l| l.1).sum();

        let mut nodes = Vec::with_capacity(2 * leaves.len());
        let mut heap = BinaryHeap::with_capacity(leaves.len());
        for &(t, p) in &leaves {
            heap.push(HeapItem {
                prob: p / z,
                min_id: t,
                node: nodes.len(),
            });
            nodes.push(Node::Leaf(t));
        }
        while heap.len() > 1 {
            let a = heap.pop().expect("two items");
            let b = heap.pop().expect("two items");
            // `b` is at least as probable as `a`; on a tie the smaller id leads
            let (zero, one) = if b.prob > a.prob || (b.prob == a.prob && b.min_id < a.min_id) {
                (b, a)
            } else {
                (a, b)
            };
            heap.push(HeapItem {
                prob: zero.prob + one.prob,
                min_id: zero.min_id.min(one.min_id),
                node: nodes.len(),
            });
            nodes.push(Node::Branch([zero.node, one.node]));
        }
        let root = heap.pop().expect("non-empty").node;

        let mut codes = Vec::with_capacity(leaves.len());
        let mut stack = vec![(root, Vec::new())];
        while let Some((n, prefix)) = stack.pop() {
            match &nodes[n] {
                Node::Leaf(t) => codes.push((*t, prefix)),
                Node::Branch([zero, one]) => {
                    let mut p1 = prefix.clone();
                    p1.push(true);
                    stack.push((*one, p1));
                    let mut p0 = prefix;
                    p0.push(false);
                    stack.push((*zero, p0));
                }
            }
        }
        codes.sort_unstable_by_key(|c| c.0);
        Ok(Self { nodes, root, codes })
    }

    /// `(token, code)` pairs sorted by token id.
    pub fn codes(&self) -> &[(TokenId, Vec<bool>)] {
        &self.codes
    }

    pub fn code(&self, token: TokenId) -> Option<&[bool]> {
        self.codes
            .binary_search_by_key(&token, |c| c.0)
            .ok()
            .map(|i| self.codes[i].1.as_slice())
    }

    /// Follows bits from `next_bit` down to a leaf; returns the token and
    /// the number of bits read.
    pub fn walk(&self, mut next_bit: impl FnMut() -> bool) -> (TokenId, usize) {
        let mut n = self.root;
        let mut read = 0;
        loop {
            match &self.nodes[n] {
                Node::Leaf(t) => return (*t, read),
                Node::Branch(children) => {
                    n = children[next_bit() as usize];
                    read += 1;
                }
            }
        }
    }

    /// Probability the tree assigns to each leaf under uniform input bits.
    pub fn induced(&self) -> impl Iterator<Item = (TokenId, f64)> + '_ {
        self.codes
            .iter()
            .map(|(t, c)| (*t, 0.5f64.powi(c.len() as i32)))
    }
}

fn raw_step<M: LanguageModel + ?Sized>(model: &M, ctx: &[TokenId]) -> Result<Vec<f64>> {
    let raw = model.raw_distribution(ctx)?;
    check_probabilities(&raw)?;
    Ok(raw)
}

/// Huffman step as reported to observers.
#[derive(Debug)]
pub struct HuffmanStep<'a> {
    pub raw: &'a [f64],
    pub tree: &'a HuffmanTree,
    pub token: TokenId,
    pub bits_read: usize,
}

/// Encodes raw `bits`: each step walks the step's tree, reading pad bits
/// once `bits` runs out, until every bit has been read.
pub fn huffman_encode_bits<M: LanguageModel + ?Sized>(
    bits: &[bool],
    context: &[TokenId],
    model: &M,
    truncation: usize,
    max_tokens: usize,
    mut observe: impl FnMut(&HuffmanStep<'_>),
) -> Result<CoverText> {
    check_context(model.vocabulary(), context)?;
    let mut ctx = context.to_vec();
    let mut tokens = Vec::new();
    let mut pos = 0;
    while pos < bits.len() {
        if tokens.len() >= max_tokens {
            return Err(Error::MessageTooLong {
                tokens_emitted: tokens.len(),
                consumed_bits: pos,
                needed_bits: bits.len(),
                partial: tokens,
            });
        }
        let raw = raw_step(model, &ctx)?;
        let tree = HuffmanTree::build(&raw, truncation)?;
        let (token, read) = tree.walk(|| {
            let b = padded_bit(bits, pos);
            pos += 1;
            b
        });
        observe(&HuffmanStep {
            raw: &raw,
            tree: &tree,
            token,
            bits_read: read,
        });
        tokens.push(token);
        ctx.push(token);
    }
    Ok(CoverText::new(context.to_vec(), tokens))
}

/// Concatenated codes of the cover tokens, until `enough` is satisfied.
pub fn huffman_decode_bits<M: LanguageModel + ?Sized>(
    cover: &CoverText,
    model: &M,
    truncation: usize,
    mut enough: impl FnMut(&[bool]) -> bool,
) -> Result<Vec<bool>> {
    check_context(model.vocabulary(), &cover.context)?;
    let mut ctx = cover.context.clone();
    let mut bits = Vec::new();
    for (step, &token) in cover.tokens.iter().enumerate() {
        if enough(&bits) {
            break;
        }
        let raw = raw_step(model, &ctx)?;
        let tree = HuffmanTree::build(&raw, truncation)?;
        let code = tree.code(token).ok_or(Error::Desync {
            step,
            token,
            reason: "is outside the truncated Huffman tree",
        })?;
        bits.extend_from_slice(code);
        ctx.push(token);
    }
    Ok(bits)
}

pub fn huffman_encode<M: LanguageModel + ?Sized>(
    message: &BitMessage,
    context: &[TokenId],
    model: &M,
    truncation: usize,
    max_tokens: Option<usize>,
) -> Result<CoverText> {
    let framed = message.framed();
    let budget = max_tokens.unwrap_or_else(|| default_max_tokens(framed.len()));
    huffman_encode_bits(&framed, context, model, truncation, budget, |_| {})
}

pub fn huffman_decode<M: LanguageModel + ?Sized>(
    cover: &CoverText,
    model: &M,
    truncation: usize,
) -> Result<BitMessage> {
    let bits = huffman_decode_bits(cover, model, truncation, |bits| {
        BitMessage::announced_len(bits).is_some_and(|n| bits.len() >= HEADER_BITS + n)
    })?;
    BitMessage::unframe(&bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::bit_string;
    use crate::probmodel::ToyModel;

    fn code_str(tree: &HuffmanTree, t: TokenId) -> String {
        bit_string(tree.code(t).unwrap())
    }

    #[test]
    fn hand_built_tree() {
        // A=0 B=1 C=2
        let tree = HuffmanTree::build(&[0.5, 0.25, 0.25], 4).unwrap();
        assert_eq!(code_str(&tree, 0), "0");
        assert_eq!(code_str(&tree, 1), "10");
        assert_eq!(code_str(&tree, 2), "11");
        let mut bits = [true, false].into_iter();
        assert_eq!(tree.walk(|| bits.next().unwrap()), (1, 2));
    }

    #[test]
    fn truncation_two_is_one_bit() {
        let tree = HuffmanTree::build(&[0.1, 0.5, 0.25, 0.15], 2).unwrap();
        assert_eq!(tree.codes().len(), 2);
        assert_eq!(code_str(&tree, 1), "0");
        assert_eq!(code_str(&tree, 2), "1");
    }

    #[test]
    fn prefix_free_and_kraft_tight() {
        let raw = [0.3, 0.2, 0.15, 0.1, 0.1, 0.05, 0.05, 0.05];
        let tree = HuffmanTree::build(&raw, 8).unwrap();
        let kraft: f64 = tree.induced().map(|(_, q)| q).sum();
        assert_eq!(kraft, 1.0);
        for (i, (_, a)) in tree.codes().iter().enumerate() {
            for (j, (_, b)) in tree.codes().iter().enumerate() {
                if i != j {
                    assert!(!b.starts_with(a), "{a:?} prefixes {b:?}");
                }
            }
        }
    }

    #[test]
    fn decode_of_b_under_abc_tree() {
        let model = ToyModel::iid(&[(1, 2), (1, 4), (1, 4)]).unwrap();
        let b = model.vocabulary().id("t1").unwrap();
        let cover = CoverText::new(vec![], vec![b]);
        let bits = huffman_decode_bits(&cover, &model, 4, |_| false).unwrap();
        assert_eq!(bit_string(&bits), "10");
    }

    #[test]
    fn token_outside_truncation_is_desync() {
        let model = ToyModel::iid(&[(1, 2), (1, 4), (1, 4)]).unwrap();
        let c = model.vocabulary().id("t2").unwrap();
        let cover = CoverText::new(vec![], vec![c]);
        assert!(matches!(
            huffman_decode_bits(&cover, &model, 2, |_| false),
            Err(Error::Desync { step: 0, .. })
        ));
    }

    #[test]
    fn roundtrip_small() {
        let model = ToyModel::once_upon_a_time();
        let msg = BitMessage::from_bit_str("1100101").unwrap();
        let ctx = [model.vocabulary().bos()];
        let cover = huffman_encode(&msg, &ctx, &model, 4, None).unwrap();
        assert_eq!(huffman_decode(&cover, &model, 4).unwrap(), msg);
    }

    #[test]
    fn rejects_small_truncation() {
        assert!(HuffmanTree::build(&[0.5, 0.5], 1).is_err());
    }
}
