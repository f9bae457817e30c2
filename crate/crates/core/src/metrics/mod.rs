//! Compression and security measurements: bits per word, the per-step KL
//! divergence of each method's induced token distribution from the raw
//! model, entropy estimates, and the parameter sweep in [`sweep`].
//!
//! KL values are in nats, bits per word in bits.

pub mod sweep;

pub use sweep::{
    default_grid, interpolate, parse_grid, run_sweep, to_csv, to_gnuplot, to_json, unit_seed,
    SweepConfig, SweepPoint, DEFAULT_SWEEP_TOP_K,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arithmetic::encode_bits_observed;
use crate::baselines::{block_encode_bits, huffman_encode_bits, BlockAssignment, BlockKey, HuffmanTree};
use crate::error::{Error, Result};
use crate::method::Method;
use crate::probmodel::{next_distribution, LanguageModel, ModulationParams, TokenDistribution, TokenId};

/// `KL(q ‖ p)` in nats, where `q` lists `(token, probability)` pairs and
/// tokens absent from `q` have `q = 0`.
///
/// Evaluated as `Σ q·(r − ln(1 + r))` with `r = p/q − 1` over the support of
/// `q`, plus the mass of `p` outside it. Every term is non-negative and
/// tiny divergences keep their relative accuracy.
pub fn kl_divergence(q: impl IntoIterator<Item = (TokenId, f64)>, p: &[f64]) -> f64 {
    let mut kl = 0.0;
    let mut covered = 0.0;
    for (t, qt) in q {
        if qt <= 0.0 {
            continue;
        }
        let pt = p[t as usize];
        if pt <= 0.0 {
            return f64::INFINITY;
        }
        covered += pt;
        let r = pt / qt - 1.0;
        // series of r - ln(1 + r); the next term is below 2^-52 of the first
        let d = if r.abs() < 1e-4 {
            r * r * (0.5 - r / 3.0 + r * r / 4.0)
        } else {
            r - r.ln_1p()
        };
        kl += (qt * d).max(0.0);
    }
    let total: f64 = p.iter().sum();
    kl + (total - covered).max(0.0)
}

/// Per-step KL of arithmetic coding: `q` is the quantized table.
pub fn arithmetic_step_kl(raw: &[f64], dist: &TokenDistribution) -> f64 {
    kl_divergence(dist.probabilities(), raw)
}

/// Per-step KL of Huffman coding: `q(t) = 2^-|code(t)|` on the leaves.
pub fn huffman_step_kl(raw: &[f64], tree: &HuffmanTree) -> f64 {
    kl_divergence(tree.induced(), raw)
}

/// Per-step KL of block coding: `q = 2^-|B|` on each bin's most probable
/// token.
pub fn block_step_kl(raw: &[f64], assignment: &BlockAssignment) -> f64 {
    let q = 0.5f64.powi(assignment.key().block_bits() as i32);
    kl_divergence(
        assignment.argmaxes(raw).into_iter().flatten().map(|t| (t, q)),
        raw,
    )
}

/// One generated cover with its per-step measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StegoRecord {
    pub context: Vec<TokenId>,
    pub method: Method,
    pub message_bits: usize,
    pub cover: Vec<TokenId>,
    pub kl_nats: Vec<f64>,
    /// Message bits each token carries: bits settled by the step for
    /// arithmetic coding, the code length for Huffman, `|B|` for block.
    pub bits_consumed: Vec<usize>,
}

impl StegoRecord {
    pub fn bits_per_word(&self) -> Result<f64> {
        bits_per_word(self)
    }

    pub fn kl_per_word(&self) -> Result<f64> {
        if self.cover.is_empty() {
            return Err(Error::InvalidParams("record has no cover tokens".into()));
        }
        Ok(self.kl_nats.iter().sum::<f64>() / self.cover.len() as f64)
    }
}

pub fn bits_per_word(record: &StegoRecord) -> Result<f64> {
    if record.cover.is_empty() {
        return Err(Error::InvalidParams("record has no cover tokens".into()));
    }
    Ok(record.bits_consumed.iter().sum::<usize>() as f64 / record.cover.len() as f64)
}

/// Encodes raw `bits` (no length header) with `method` and records every
/// step.
pub fn record<M: LanguageModel + ?Sized>(
    method: &Method,
    bits: &[bool],
    context: &[TokenId],
    model: &M,
    max_tokens: usize,
) -> Result<StegoRecord> {
    let mut kl_nats = Vec::new();
    let mut bits_consumed = Vec::new();
    let cover = match method {
        Method::Arithmetic(params) => {
            encode_bits_observed(bits, context, model, params, max_tokens, |s| {
                kl_nats.push(arithmetic_step_kl(s.raw, s.dist));
                bits_consumed.push(s.settled_bits);
            })?
        }
        Method::Huffman { truncation } => {
            huffman_encode_bits(bits, context, model, *truncation, max_tokens, |s| {
                kl_nats.push(huffman_step_kl(s.raw, s.tree));
                bits_consumed.push(s.bits_read);
            })?
        }
        Method::Block { block_bits, seed } => {
            let key = BlockKey::new(*block_bits, *seed)?;
            let assignment = key.assignment(model.vocabulary().len());
            block_encode_bits(bits, context, model, &assignment, max_tokens, |s| {
                kl_nats.push(block_step_kl(s.raw, &assignment));
                bits_consumed.push(*block_bits as usize);
            })?
        }
    };
    Ok(StegoRecord {
        context: context.to_vec(),
        method: method.clone(),
        message_bits: bits.len(),
        cover: cover.tokens,
        kl_nats,
        bits_consumed,
    })
}

/// Mean with its standard error (sample standard deviation over `√n`).
/// The standard error is reported as zero when `n < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: 0.0,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n < 2 {
            0.0
        } else {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { mean, stderr, n }
    }

    pub fn stderr_defined(&self) -> bool {
        self.n >= 2
    }
}

/// Monte Carlo estimate of the mean per-token entropy (bits) of the
/// modulated, quantized distribution along trajectories sampled from it.
///
/// Sample `i` starts from `contexts[i % contexts.len()]` and runs
/// `tokens_per_sample` steps; each sample contributes its mean entropy.
pub fn entropy_per_word<M: LanguageModel + ?Sized>(
    model: &M,
    contexts: &[Vec<TokenId>],
    params: &ModulationParams,
    n_samples: usize,
    tokens_per_sample: usize,
    seed: u64,
) -> Result<Estimate> {
    if contexts.is_empty() || n_samples == 0 || tokens_per_sample == 0 {
        return Err(Error::InvalidParams(
            "entropy estimate needs contexts, samples and tokens".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_sample = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let mut ctx = contexts[i % contexts.len()].clone();
        let mut total = 0.0;
        for _ in 0..tokens_per_sample {
            let dist = next_distribution(model, &ctx, params)?;
            total += dist.entropy_bits();
            let index = dist.index_at(rng.gen::<u64>());
            ctx.push(dist.token(index));
        }
        per_sample.push(total / tokens_per_sample as f64);
    }
    Ok(Estimate::from_samples(&per_sample))
}
