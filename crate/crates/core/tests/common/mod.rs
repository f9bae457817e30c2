//! Reference coder in unbounded-precision rationals over the same quantized
//! distributions the fixed-precision coder sees.

#![allow(dead_code)]

use lmstego::bits::padded_bit;
use lmstego::probmodel::next_distribution;
use lmstego::{LanguageModel, ModulationParams, TokenId, ToyModel};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn pow2(e: usize) -> BigRational {
    BigRational::from_integer(BigInt::one() << e)
}

/// The point `0.b1 b2 ... bn 1 0 1 0 ...`.
pub fn message_point(bits: &[bool]) -> BigRational {
    let n = bits.len();
    let mut x = BigRational::zero();
    for (i, &b) in bits.iter().enumerate() {
        if b {
            x += BigRational::one() / pow2(i + 1);
        }
    }
    // Period-two tail: (p_n / 2^(n+1) + p_(n+1) / 2^(n+2)) / (1 - 1/4).
    let mut period = BigRational::zero();
    for i in [n, n + 1] {
        if padded_bit(bits, i) {
            period += BigRational::one() / pow2(i + 1);
        }
    }
    x + period * BigRational::new(4.into(), 3.into())
}

/// Number of leading bits shared by every point of `[low, high)`.
pub fn settled(low: &BigRational, high: &BigRational) -> usize {
    let mut k = 0;
    loop {
        let scale = pow2(k + 1);
        let cell = (low * &scale).floor();
        if (high * &scale) > cell + BigRational::one() {
            return k;
        }
        k += 1;
        assert!(k < 4096, "degenerate interval");
    }
}

/// Leading `n` bits of `x` in `[0, 1)`.
pub fn leading_bits(x: &BigRational, n: usize) -> Vec<bool> {
    let mut v = x.clone();
    let two = BigRational::from_integer(2.into());
    (0..n)
        .map(|_| {
            v *= &two;
            let bit = v >= BigRational::one();
            if bit {
                v -= BigRational::one();
            }
            bit
        })
        .collect()
}

#[derive(Debug, PartialEq, Eq)]
pub struct OracleRun {
    pub tokens: Vec<TokenId>,
    /// Whether every message bit was settled within the token budget.
    pub complete: bool,
}

fn exact_bins<M: LanguageModel + ?Sized>(
    model: &M,
    ctx: &[TokenId],
    params: &ModulationParams,
    low: &BigRational,
    high: &BigRational,
) -> Vec<(TokenId, BigRational, BigRational)> {
    let dist = next_distribution(model, ctx, params).unwrap();
    let width = high - low;
    let total = pow2(params.precision as usize);
    (0..dist.len())
        .map(|i| {
            let (a, b) = dist.bounds(i);
            let lo = low + &width * BigRational::from_integer(a.into()) / &total;
            let hi = low + &width * BigRational::from_integer(b.into()) / &total;
            (dist.token(i), lo, hi)
        })
        .collect()
}

pub fn oracle_encode<M: LanguageModel + ?Sized>(
    bits: &[bool],
    context: &[TokenId],
    model: &M,
    params: &ModulationParams,
    max_tokens: usize,
) -> OracleRun {
    let x = message_point(bits);
    let (mut low, mut high) = (BigRational::zero(), BigRational::one());
    let mut ctx = context.to_vec();
    let mut tokens = Vec::new();
    while settled(&low, &high) < bits.len() {
        if tokens.len() == max_tokens {
            return OracleRun {
                tokens,
                complete: false,
            };
        }
        let (token, lo, hi) = exact_bins(model, &ctx, params, &low, &high)
            .into_iter()
            .find(|(_, lo, hi)| *lo <= x && x < *hi)
            .expect("bins cover the interval");
        low = lo;
        high = hi;
        tokens.push(token);
        ctx.push(token);
    }
    OracleRun {
        tokens,
        complete: true,
    }
}

/// Bits settled by narrowing to `tokens` in turn.
pub fn oracle_decode<M: LanguageModel + ?Sized>(
    tokens: &[TokenId],
    context: &[TokenId],
    model: &M,
    params: &ModulationParams,
) -> Vec<bool> {
    let (mut low, mut high) = (BigRational::zero(), BigRational::one());
    let mut ctx = context.to_vec();
    for &t in tokens {
        let (_, lo, hi) = exact_bins(model, &ctx, params, &low, &high)
            .into_iter()
            .find(|(tok, _, _)| *tok == t)
            .expect("token in support");
        low = lo;
        high = hi;
        ctx.push(t);
    }
    leading_bits(&low, settled(&low, &high))
}

/// Small models with at most five vocabulary entries, markers included.
pub fn small_models() -> Vec<(&'static str, ToyModel)> {
    vec![
        ("dyadic", ToyModel::iid(&[(1, 2), (1, 4), (1, 4)]).unwrap()),
        ("thirds", ToyModel::iid(&[(1, 3), (1, 3), (1, 3)]).unwrap()),
        ("skewed", ToyModel::iid(&[(7, 10), (2, 10), (1, 10)]).unwrap()),
        ("coin", ToyModel::iid(&[(1, 2), (1, 2)]).unwrap()),
        (
            "contextual",
            ToyModel::from_rows(&[
                (&[], &[("a", 3, 5), ("b", 1, 5), ("c", 1, 5)]),
                (&["a"], &[("a", 1, 7), ("b", 5, 7), ("c", 1, 7)]),
                (&["b"], &[("a", 1, 3), ("c", 2, 3)]),
                (&["a", "b"], &[("a", 9, 10), ("b", 1, 20), ("c", 1, 20)]),
            ])
            .unwrap(),
        ),
    ]
}

/// Every bit string of length `0..=max_len`.
pub fn all_messages(max_len: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..=max_len).flat_map(|n| {
        (0u32..1 << n).map(move |v| (0..n).rev().map(|j| (v >> j) & 1 == 1).collect())
    })
}

pub fn to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
