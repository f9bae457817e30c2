//! Parameter sweeps: for every grid point, encode uniform random messages
//! after the given contexts and aggregate bits/word and KL/word.
//!
//! Every (grid point, sample) pair is an independent unit with its own
//! ChaCha stream, so results do not depend on scheduling.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{record, Estimate};
use crate::arithmetic::default_max_tokens;
use crate::error::{Error, Result};
use crate::method::{Method, MethodKind};
use crate::probmodel::{LanguageModel, ModulationParams, TokenId, DEFAULT_PRECISION};

pub const DEFAULT_SWEEP_TOP_K: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub contexts: Vec<Vec<TokenId>>,
    pub grid: Vec<Method>,
    pub n_samples: usize,
    /// Length of each random message, without any header.
    pub message_bits: usize,
    /// Token budget per sample; defaults to the codec default.
    pub max_tokens: Option<usize>,
    pub seed: u64,
}

/// Aggregate over the samples of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub method: MethodKind,
    pub param: f64,
    pub mean_bits_per_word: f64,
    pub bpw_stderr: f64,
    pub mean_kl_nats_per_word: f64,
    pub kl_stderr: f64,
    /// Successful samples; standard errors are zero when this is below 2.
    pub n_samples: usize,
    pub failures: usize,
}

impl SweepPoint {
    pub fn stderr_defined(&self) -> bool {
        self.n_samples >= 2
    }
}

/// τ from 0.4 to 1.2 at k = 300, Huffman truncation 2..=256 in powers of
/// two, and block sizes 1..=5 bits.
pub fn default_grid(block_seed: u64) -> Vec<Method> {
    let mut grid: Vec<Method> = (4..=12)
        .map(|t| {
            Method::Arithmetic(ModulationParams {
                temperature: t as f64 / 10.0,
                top_k: Some(DEFAULT_SWEEP_TOP_K),
                precision: DEFAULT_PRECISION,
            })
        })
        .collect();
    grid.extend((1..=8).map(|e| Method::Huffman { truncation: 1 << e }));
    grid.extend((1..=5).map(|block_bits| Method::Block {
        block_bits,
        seed: block_seed,
    }));
    grid
}

/// Parses `default` or `;`-separated `method:v1,v2,..` groups, for example
/// `arithmetic:0.4,0.8,1.2;huffman:2,16;block:1,3`. Arithmetic values are
/// temperatures and use `top_k`/`precision`; block values are sizes in bits
/// and use `block_seed`.
pub fn parse_grid(
    spec: &str,
    top_k: Option<usize>,
    precision: u32,
    block_seed: u64,
) -> Result<Vec<Method>> {
    let spec = spec.trim();
    if spec == "default" {
        return Ok(default_grid(block_seed));
    }
    let bad = |what: &str| Error::Config(format!("grid: {what}"));
    let mut grid = Vec::new();
    for group in spec.split(';').map(str::trim).filter(|g| !g.is_empty()) {
        let (name, values) = group
            .split_once(':')
            .ok_or_else(|| bad(&format!("expected method:values in {group:?}")))?;
        for v in values.split(',').map(str::trim).filter(|v| !v.is_empty()) {
            let method = match name.trim() {
                "arithmetic" => Method::Arithmetic(ModulationParams {
                    temperature: v.parse().map_err(|_| bad(&format!("temperature {v:?}")))?,
                    top_k,
                    precision,
                }),
                "huffman" => Method::Huffman {
                    truncation: v.parse().map_err(|_| bad(&format!("truncation {v:?}")))?,
                },
                "block" => Method::Block {
                    block_bits: v.parse().map_err(|_| bad(&format!("block size {v:?}")))?,
                    seed: block_seed,
                },
                other => return Err(bad(&format!("unknown method {other:?}"))),
            };
            method.validate()?;
            grid.push(method);
        }
    }
    if grid.is_empty() {
        return Err(bad("no grid points"));
    }
    Ok(grid)
}

/// Seed of one sample: the first eight bytes of
/// SHA-256(seed ‖ method ‖ tuning value ‖ sample index), little-endian.
pub fn unit_seed(seed: u64, method: &Method, sample: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(method.kind().as_str().as_bytes());
    h.update(method.tuning_value().to_bits().to_le_bytes());
    h.update((sample as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

enum Outcome {
    Ok { bpw: f64, kl: f64 },
    Failed,
}

pub fn run_sweep<M: LanguageModel + ?Sized>(model: &M, config: &SweepConfig) -> Result<Vec<SweepPoint>> {
    if config.contexts.is_empty() {
        return Err(Error::InvalidParams("sweep needs at least one context".into()));
    }
    if config.n_samples == 0 || config.message_bits == 0 {
        return Err(Error::InvalidParams(
            "sweep needs at least one sample and one message bit".into(),
        ));
    }
    for m in &config.grid {
        m.validate()?;
    }
    let budget = config
        .max_tokens
        .unwrap_or_else(|| default_max_tokens(config.message_bits));
    let n = config.n_samples;
    let units = config.grid.len() * n;

    let outcomes: Vec<Outcome> = (0..units)
        .into_par_iter()
        .map(|u| {
            let method = &config.grid[u / n];
            let sample = u % n;
            let mut rng = ChaCha8Rng::seed_from_u64(unit_seed(config.seed, method, sample));
            let bits: Vec<bool> = (0..config.message_bits).map(|_| rng.gen()).collect();
            let ctx = &config.contexts[sample % config.contexts.len()];
            match record(method, &bits, ctx, model, budget) {
                Ok(r) => Ok(Outcome::Ok {
                    bpw: r.bits_per_word()?,
                    kl: r.kl_per_word()?,
                }),
                Err(Error::MessageTooLong { .. }) => Ok(Outcome::Failed),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(config.grid.len());
    for (method, chunk) in config.grid.iter().zip(outcomes.chunks(n)) {
        let mut bpw = Vec::with_capacity(n);
        let mut kl = Vec::with_capacity(n);
        let mut failures = 0;
        for outcome in chunk {
            match outcome {
                Outcome::Ok { bpw: b, kl: k } => {
                    bpw.push(*b);
                    kl.push(*k);
                }
                Outcome::Failed => failures += 1,
            }
        }
        let b = Estimate::from_samples(&bpw);
        let k = Estimate::from_samples(&kl);
        points.push(SweepPoint {
            method: method.kind(),
            param: method.tuning_value(),
            mean_bits_per_word: b.mean,
            bpw_stderr: b.stderr,
            mean_kl_nats_per_word: k.mean,
            kl_stderr: k.stderr,
            n_samples: b.n,
            failures,
        });
    }
    Ok(points)
}

/// KL/word of one method's curve at `bits_per_word`, linearly interpolated
/// between the two neighbouring grid points; `(kl, stderr)`. `None` outside
/// the curve's range.
pub fn interpolate(points: &[SweepPoint], method: MethodKind, bits_per_word: f64) -> Option<(f64, f64)> {
    let mut curve: Vec<&SweepPoint> = points
        .iter()
        .filter(|p| p.method == method && p.n_samples > 0)
        .collect();
    curve.sort_by(|a, b| a.mean_bits_per_word.total_cmp(&b.mean_bits_per_word));
    curve.windows(2).find_map(|w| {
        let (a, b) = (w[0], w[1]);
        let (x0, x1) = (a.mean_bits_per_word, b.mean_bits_per_word);
        if !(x0 <= bits_per_word && bits_per_word <= x1) {
            return None;
        }
        let t = if x1 > x0 {
            (bits_per_word - x0) / (x1 - x0)
        } else {
            0.0
        };
        Some((
            a.mean_kl_nats_per_word + t * (b.mean_kl_nats_per_word - a.mean_kl_nats_per_word),
            a.kl_stderr + t * (b.kl_stderr - a.kl_stderr),
        ))
    })
}

pub const CSV_HEADER: &str = "method,param,bits_per_word,bpw_stderr,kl_nats_per_word,kl_stderr,n";

pub fn to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.method,
            p.param,
            p.mean_bits_per_word,
            p.bpw_stderr,
            p.mean_kl_nats_per_word,
            p.kl_stderr,
            p.n_samples
        )
        .expect("write to string");
    }
    out
}

#[derive(Serialize)]
struct PlotSeries<'a> {
    method: MethodKind,
    points: Vec<&'a SweepPoint>,
}

/// `{"x": "bits_per_word", "y": "kl_nats_per_word", "series": [..]}` with
/// one series per method in grid order.
pub fn to_json(points: &[SweepPoint]) -> String {
    let mut series: Vec<PlotSeries<'_>> = Vec::new();
    for p in points {
        match series.iter_mut().find(|s| s.method == p.method) {
            Some(s) => s.points.push(p),
            None => series.push(PlotSeries {
                method: p.method,
                points: vec![p],
            }),
        }
    }
    let doc = serde_json::json!({
        "x": "bits_per_word",
        "y": "kl_nats_per_word",
        "series": series,
    });
    serde_json::to_string_pretty(&doc).expect("serializable")
}

/// One data block per method (separated by two blank lines, addressable
/// with gnuplot's `index`): bits/word, KL/word and their standard errors.
pub fn to_gnuplot(points: &[SweepPoint]) -> String {
    let mut out = String::new();
    for (i, kind) in MethodKind::ALL.iter().enumerate() {
        let rows: Vec<&SweepPoint> = points.iter().filter(|p| p.method == *kind).collect();
        if i > 0 {
            out.push_str("\n\n");
        }
        writeln!(out, "# {kind}\n# bits_per_word kl_nats_per_word bpw_stderr kl_stderr param").expect("write");
        for p in rows {
            writeln!(
                out,
                "{} {} {} {} {}",
                p.mean_bits_per_word, p.mean_kl_nats_per_word, p.bpw_stderr, p.kl_stderr, p.param
            )
            .expect("write");
        }
    }
    out
}
