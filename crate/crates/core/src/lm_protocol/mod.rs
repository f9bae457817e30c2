//! JSON-over-HTTP access to an external language model.
//!
//! | endpoint            | request                | response                                   |
//! |---------------------|------------------------|--------------------------------------------|
//! | `GET /vocab`        |                        | `{tokens, bos, eos, max_context?, fingerprint?}` |
//! | `POST /distribution`| `{context: [ids]}`     | `{probs: ["0.25", ..]}` or `{top: [[id, "p"], ..], rest: "p"}` |
//! | `POST /tokenize`    | `{text}`               | `{ids}`                                    |
//! | `POST /detokenize`  | `{ids}`                | `{text}`                                   |
//!
//! Errors come back as a non-2xx status with `{error}`. Probabilities travel
//! as decimal strings so every client parses exactly the same doubles.
//!
//! [`RemoteModel`] is the client. It checks the vocabulary fingerprint once,
//! probes the server for determinism and tokenizer round trips, and then
//! serves as an ordinary [`LanguageModel`]. [`serve`] exposes any in-process
//! model under the same protocol.

mod server;

pub use server::{serve, ServerConfig, ServerHandle};

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probmodel::{LanguageModel, TokenId, Vocabulary, SUM_TOLERANCE};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);
/// Repetitions of each probe context at session start.
pub const PROBE_REPEATS: usize = 10;
pub const PROBE_CONTEXTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabResponse {
    pub tokens: Vec<String>,
    pub bos: TokenId,
    pub eos: TokenId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_context: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionRequest {
    pub context: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DistributionResponse {
    Dense { probs: Vec<String> },
    /// The `top` entries with their mass, plus the mass left to every
    /// unlisted token together.
    Sparse { top: Vec<(TokenId, String)>, rest: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizeRequest {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizeResponse {
    pub ids: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetokenizeRequest {
    pub ids: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetokenizeResponse {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// Seventeen significant digits: enough to round-trip any double.
pub fn format_probability(p: f64) -> String {
    format!("{p:.16e}")
}

fn parse_probability(s: &str) -> Result<f64> {
    let p: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::Protocol(format!("probability {s:?} is not a decimal number")))?;
    if !(p.is_finite() && p >= 0.0) {
        return Err(Error::Protocol(format!("probability {s:?} out of range")));
    }
    Ok(p)
}

/// Expands a response to a dense vector over `vocab_size` tokens and checks
/// that it sums to one. Sparse remainder mass is spread evenly over the
/// unlisted tokens.
pub fn decode_distribution(resp: &DistributionResponse, vocab_size: usize) -> Result<Vec<f64>> {
    let probs = match resp {
        DistributionResponse::Dense { probs } => {
            if probs.len() != vocab_size {
                return Err(Error::Protocol(format!(
                    "distribution has {} entries for a vocabulary of {vocab_size}",
                    probs.len()
                )));
            }
            probs.iter().map(|s| parse_probability(s)).collect::<Result<Vec<_>>>()?
        }
        DistributionResponse::Sparse { top, rest } => {
            let mut probs = vec![f64::NAN; vocab_size];
            for (id, s) in top {
                let slot = probs
                    .get_mut(*id as usize)
                    .ok_or_else(|| Error::Protocol(format!("token id {id} out of range")))?;
                if !slot.is_nan() {
                    return Err(Error::Protocol(format!("token id {id} listed twice")));
                }
                *slot = parse_probability(s)?;
            }
            let rest = parse_probability(rest)?;
            let unlisted = vocab_size - top.len();
            let share = if unlisted == 0 { 0.0 } else { rest / unlisted as f64 };
            if unlisted == 0 && rest > SUM_TOLERANCE {
                return Err(Error::Protocol(format!(
                    "remainder {rest} with every token listed"
                )));
            }
            for p in probs.iter_mut().filter(|p| p.is_nan()) {
                *p = share;
            }
            probs
        }
    };
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Protocol(format!(
            "distribution sums to {sum}, outside 1 ± {SUM_TOLERANCE}"
        )));
    }
    Ok(probs)
}

/// Where the model lives and what was learned about it at session start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub max_context: Option<usize>,
    pub fingerprint: String,
}

/// A language model behind the HTTP protocol.
#[derive(Debug)]
pub struct RemoteModel {
    endpoint: ModelEndpoint,
    agent: ureq::Agent,
    vocab: Vocabulary,
}

fn transport(e: ureq::Error) -> Error {
    match e {
        ureq::Error::Status(code, resp) => {
            let detail = resp
                .into_json::<ErrorResponse>()
                .map(|r| r.error)
                .unwrap_or_else(|_| "no error body".into());
            Error::Protocol(format!("server answered {code}: {detail}"))
        }
        ureq::Error::Transport(t) => Error::Transport(t.to_string()),
    }
}

fn read_json<T: DeserializeOwned>(resp: ureq::Response) -> Result<T> {
    resp.into_json()
        .map_err(|e| Error::Protocol(format!("malformed response: {e}")))
}

impl RemoteModel {
    /// Opens a session: fetches the vocabulary, then runs the determinism and
    /// tokenizer probes. With `expected_fingerprint`, a server whose
    /// vocabulary differs is refused with [`Error::KeyMismatch`].
    pub fn connect(
        base_url: &str,
        timeout: Duration,
        expected_fingerprint: Option<&str>,
    ) -> Result<Self> {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let base_url = base_url.trim_end_matches('/').to_owned();
        let (vocab, max_context) = fetch_vocab_with(&agent, &base_url)?;
        let fingerprint = vocab.fingerprint();
        if let Some(expected) = expected_fingerprint {
            if expected != fingerprint {
                return Err(Error::KeyMismatch(format!(
                    "server vocabulary fingerprint {fingerprint} differs from the key's {expected}"
                )));
            }
        }
        let model = Self {
            endpoint: ModelEndpoint {
                base_url,
                timeout,
                max_context,
                fingerprint,
            },
            agent,
            vocab,
        };
        model.determinism_probe(PROBE_CONTEXTS, PROBE_REPEATS)?;
        model.tokenizer_probe()?;
        Ok(model)
    }

    pub fn endpoint(&self) -> &ModelEndpoint {
        &self.endpoint
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.endpoint.base_url)
    }

    fn post<Req: Serialize, Resp: DeserializeOwned>(&self, path: &str, body: &Req) -> Result<Resp> {
        let resp = self
            .agent
            .post(&self.url(path))
            .send_json(body)
            .map_err(transport)?;
        read_json(resp)
    }

    /// Fetches the vocabulary again and fails with [`Error::KeyMismatch`] if
    /// it changed since the session started.
    pub fn fetch_vocab(&self) -> Result<Vocabulary> {
        let (vocab, _) = fetch_vocab_with(&self.agent, &self.endpoint.base_url)?;
        if vocab.fingerprint() != self.endpoint.fingerprint {
            return Err(Error::KeyMismatch(
                "server vocabulary changed during the session".into(),
            ));
        }
        Ok(vocab)
    }

    pub fn fetch_distribution(&self, context: &[TokenId]) -> Result<Vec<f64>> {
        if let Some(max) = self.endpoint.max_context {
            if context.len() > max {
                return Err(Error::ContextTooLong {
                    len: context.len(),
                    max,
                });
            }
        }
        self.check_ids(context)?;
        let resp: DistributionResponse = self.post(
            "/distribution",
            &DistributionRequest {
                context: context.to_vec(),
            },
        )?;
        decode_distribution(&resp, self.vocab.len())
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|&&t| t as usize >= self.vocab.len()) {
            Some(&t) => Err(Error::UnknownToken(t)),
            None => Ok(()),
        }
    }

    /// Fetches each of `contexts` probe contexts `repeats` times and
    /// requires bit-identical answers.
    pub fn determinism_probe(&self, contexts: usize, repeats: usize) -> Result<()> {
        for ctx in self.probe_contexts(contexts) {
            let first = self.fetch_distribution(&ctx)?;
            for _ in 1..repeats {
                let again = self.fetch_distribution(&ctx)?;
                let same = first
                    .iter()
                    .zip(&again)
                    .all(|(a, b)| a.to_bits() == b.to_bits());
                if !same {
                    return Err(Error::Protocol(format!(
                        "server is not deterministic: context {ctx:?} gave different distributions"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `[BOS]`, then `[BOS, t]` for the first non-marker ids.
    fn probe_contexts(&self, n: usize) -> Vec<Vec<TokenId>> {
        let bos = self.vocab.bos();
        let mut out = vec![vec![bos]];
        out.extend(
            (0..self.vocab.len() as TokenId)
                .filter(|&t| !self.vocab.is_marker(t))
                .take(n.saturating_sub(1))
                .map(|t| vec![bos, t]),
        );
        out
    }

    /// The empty string must map to no ids, and text produced by the server
    /// must survive tokenize → detokenize unchanged.
    pub fn tokenizer_probe(&self) -> Result<()> {
        if !self.tokenize_remote("")?.is_empty() {
            return Err(Error::Protocol("empty text did not tokenize to no ids".into()));
        }
        let ids: Vec<TokenId> = (0..self.vocab.len() as TokenId)
            .filter(|&t| !self.vocab.is_marker(t))
            .take(4)
            .collect();
        let probe = self.detokenize_remote(&ids)?;
        let back = self.detokenize_remote(&self.tokenize_remote(&probe)?)?;
        if back != probe {
            return Err(Error::Protocol(format!(
                "tokenizer round trip changed {probe:?} into {back:?}"
            )));
        }
        Ok(())
    }

    fn tokenize_remote(&self, text: &str) -> Result<Vec<TokenId>> {
        let resp: TokenizeResponse = self.post(
            "/tokenize",
            &TokenizeRequest {
                text: text.to_owned(),
            },
        )?;
        self.check_ids(&resp.ids)
            .map_err(|_| Error::Protocol("tokenizer returned ids outside the vocabulary".into()))?;
        Ok(resp.ids)
    }

    fn detokenize_remote(&self, ids: &[TokenId]) -> Result<String> {
        self.check_ids(ids)?;
        let resp: DetokenizeResponse = self.post("/detokenize", &DetokenizeRequest { ids: ids.to_vec() })?;
        Ok(resp.text)
    }
}

fn fetch_vocab_with(agent: &ureq::Agent, base_url: &str) -> Result<(Vocabulary, Option<usize>)> {
    let resp = agent
        .get(&format!("{base_url}/vocab"))
        .call()
        .map_err(transport)?;
    let v: VocabResponse = read_json(resp)?;
    if v.tokens.is_empty() {
        return Err(Error::Protocol("server sent an empty vocabulary".into()));
    }
    let vocab = Vocabulary::from_surfaces(v.tokens, v.bos, v.eos)
        .map_err(|e| Error::Protocol(format!("bad vocabulary: {e}")))?;
    if let Some(claimed) = &v.fingerprint {
        if *claimed != vocab.fingerprint() {
            return Err(Error::Protocol(
                "server fingerprint does not match its vocabulary".into(),
            ));
        }
    }
    Ok((vocab, v.max_context))
}

impl LanguageModel for RemoteModel {
    fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    fn raw_distribution(&self, context: &[TokenId]) -> Result<Vec<f64>> {
        self.fetch_distribution(context)
    }

    fn tokenize(&self, text: &str) -> Result<Vec<TokenId>> {
        self.tokenize_remote(text)
    }

    fn detokenize(&self, ids: &[TokenId]) -> Result<String> {
        self.detokenize_remote(ids)
    }
}
