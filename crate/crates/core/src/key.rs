//! The shared key: which model, which coder with which parameters, and the
//! cover context. It lives in one TOML file that sender and receiver
//! exchange out of band.
//!
//! ```toml
//! context = "The minister said on Monday that the budget was approved ."
//!
//! [model]
//! path = "news.nglm"          # or: builtin = true, or: endpoint = "http://..."
//! fingerprint = "9c1e..."     # optional vocabulary check
//!
//! [method]
//! kind = "arithmetic"         # or "huffman" (truncation), "block" (block_bits, seed)
//! temperature = 0.9
//! top_k = 300
//! precision = 32
//!
//! [source]                    # source coding for hide/reveal
//! temperature = 1.0
//! ```
//!
//! [`Session`] turns a key into the operations the command-line tool offers.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::arithmetic::CoverText;
use crate::bits::BitMessage;
use crate::corpus;
use crate::error::{Error, Result};
use crate::lm_protocol::{RemoteModel, DEFAULT_TIMEOUT};
use crate::method::Method;
use crate::probmodel::{LanguageModel, ModulationParams, NGramModel, TokenId};
use crate::source_coding::{self, TextMessage};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// The model trained on the built-in synthetic corpus.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub builtin: bool,
    /// Serialized n-gram model; relative paths resolve against the key file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Base URL of a model server.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeout_secs: Option<u64>,
    /// Expected vocabulary fingerprint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprint: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyConfig {
    pub model: ModelSpec,
    pub method: Method,
    #[serde(default)]
    pub source: ModulationParams,
    /// Cover context text; covers continue `BOS` followed by its tokens.
    #[serde(default)]
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<usize>,
}

impl KeyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let key: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        key.validate()?;
        Ok(key)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a key file; a relative model path is taken relative to it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut key = Self::from_toml(&text)?;
        if let (Some(model), Some(dir)) = (&key.model.path, path.parent()) {
            if model.is_relative() {
                key.model.path = Some(dir.join(model));
            }
        }
        Ok(key)
    }

    pub fn validate(&self) -> Result<()> {
        let sources = [
            self.model.builtin,
            self.model.path.is_some(),
            self.model.endpoint.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::Config(
                "[model] needs exactly one of builtin, path or endpoint".into(),
            ));
        }
        self.method.validate()?;
        self.source.validate()?;
        if self.max_tokens == Some(0) {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }

    pub fn open(&self) -> Result<Session> {
        Session::open(self.clone())
    }
}

/// A loaded key: model, coder and tokenized context.
pub struct Session {
    key: KeyConfig,
    model: Box<dyn LanguageModel>,
    context: Vec<TokenId>,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("key", &self.key)
            .field("context", &self.context)
            .finish_non_exhaustive()
    }
}

impl Session {
    pub fn open(key: KeyConfig) -> Result<Self> {
        key.validate()?;
        let spec = &key.model;
        let model: Box<dyn LanguageModel> = if spec.builtin {
            Box::new(corpus::builtin_model())
        } else if let Some(path) = &spec.path {
            let file = std::fs::File::open(path)
                .map_err(|e| Error::Config(format!("model {}: {e}", path.display())))?;
            Box::new(NGramModel::read_from(std::io::BufReader::new(file))?)
        } else {
            let url = spec.endpoint.as_deref().expect("validated");
            let timeout = spec
                .timeout_secs
                .map(Duration::from_secs)
                .unwrap_or(DEFAULT_TIMEOUT);
            Box::new(RemoteModel::connect(url, timeout, spec.fingerprint.as_deref())?)
        };
        Self::with_model(key, model)
    }

    /// A session over an already constructed model.
    pub fn with_model(key: KeyConfig, model: Box<dyn LanguageModel>) -> Result<Self> {
        if let Some(expected) = &key.model.fingerprint {
            let actual = model.vocabulary().fingerprint();
            if *expected != actual {
                return Err(Error::KeyMismatch(format!(
                    "model vocabulary fingerprint {actual} differs from the key's {expected}"
                )));
            }
        }
        let context = cover_context(model.as_ref(), &key.context)?;
        Ok(Self {
            key,
            model,
            context,
        })
    }

    pub fn key(&self) -> &KeyConfig {
        &self.key
    }

    pub fn model(&self) -> &dyn LanguageModel {
        self.model.as_ref()
    }

    pub fn context(&self) -> &[TokenId] {
        &self.context
    }

    /// Context for another cover text under the same model.
    pub fn context_for(&self, text: &str) -> Result<Vec<TokenId>> {
        cover_context(self.model.as_ref(), text)
    }

    pub fn encode(&self, message: &BitMessage) -> Result<CoverText> {
        self.key
            .method
            .encode(message, &self.context, &self.model, self.key.max_tokens)
    }

    pub fn decode(&self, cover: &CoverText) -> Result<BitMessage> {
        self.key.method.decode(cover, &self.model)
    }

    /// Compresses `text` with the source parameters and hides the bits with
    /// the key's method. Fails if `text` would not come back byte for byte.
    pub fn hide(&self, text: &str) -> Result<CoverText> {
        let message = TextMessage::from_text(&self.model, text)?;
        let canonical = message.to_text(&self.model)?;
        if canonical != text {
            return Err(Error::Config(format!(
                "message would be revealed as {canonical:?}; write it in that form"
            )));
        }
        let bits = source_coding::text_to_bits(&message, &self.model, &self.key.source)?;
        self.encode(&BitMessage::new(bits))
    }

    pub fn reveal(&self, cover: &CoverText) -> Result<String> {
        let bits = self.decode(cover)?;
        let message =
            source_coding::bits_to_text(bits.payload(), &self.model, &self.key.source, None)?;
        message.to_text(&self.model)
    }

    /// Cover tokens as text. Marker tokens are written as their surfaces so
    /// that [`Session::parse_cover`] recovers exactly the same ids; an error
    /// is returned if the model's tokenizer would not.
    pub fn render_cover(&self, cover: &CoverText) -> Result<String> {
        let vocab = self.model.vocabulary();
        let mut parts = Vec::new();
        let mut run = Vec::new();
        for &t in &cover.tokens {
            if vocab.is_marker(t) {
                if !run.is_empty() {
                    parts.push(self.model.detokenize(&run)?);
                    run.clear();
                }
                parts.push(vocab.surface(t).expect("marker in vocabulary").to_owned());
            } else {
                run.push(t);
            }
        }
        if !run.is_empty() {
            parts.push(self.model.detokenize(&run)?);
        }
        let text = parts.join(" ");
        if self.parse_cover(&text)?.tokens != cover.tokens {
            return Err(Error::Format(
                "cover text does not tokenize back to its tokens; use the id format".into(),
            ));
        }
        Ok(text)
    }

    /// Inverse of [`Session::render_cover`].
    pub fn parse_cover(&self, text: &str) -> Result<CoverText> {
        let vocab = self.model.vocabulary();
        let markers = [vocab.bos(), vocab.eos()];
        let mut tokens = Vec::new();
        let mut run: Vec<&str> = Vec::new();
        let flush = |run: &mut Vec<&str>, tokens: &mut Vec<TokenId>| -> Result<()> {
            if !run.is_empty() {
                tokens.extend(self.model.tokenize(&run.join(" "))?);
                run.clear();
            }
            Ok(())
        };
        for word in text.split_whitespace() {
            match markers
                .iter()
                .find(|&&m| vocab.surface(m) == Some(word))
            {
                Some(&m) => {
                    flush(&mut run, &mut tokens)?;
                    tokens.push(m);
                }
                None => run.push(word),
            }
        }
        flush(&mut run, &mut tokens)?;
        Ok(CoverText::new(self.context.clone(), tokens))
    }

    pub fn parse_cover_ids(&self, text: &str) -> Result<CoverText> {
        CoverText::parse_id_lines(self.context.clone(), text)
    }
}

/// `BOS` followed by the tokens of `text`.
pub fn cover_context<M: LanguageModel + ?Sized>(model: &M, text: &str) -> Result<Vec<TokenId>> {
    let mut context = vec![model.vocabulary().bos()];
    context.extend(model.tokenize(text)?);
    Ok(context)
}
