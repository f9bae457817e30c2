use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::TokenId;
use crate::error::{Error, Result};

/// Reserved begin-of-sequence id in built-in models.
pub const BOS: TokenId = 0;
/// Reserved end-of-sequence id in built-in models.
pub const EOS: TokenId = 1;
pub const BOS_SURFACE: &str = "<s>";
pub const EOS_SURFACE: &str = "</s>";

/// Bijective id ↔ surface table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    surfaces: Vec<String>,
    index: HashMap<String, TokenId>,
    bos: TokenId,
    eos: TokenId,
}

impl Vocabulary {
    /// A vocabulary holding only the reserved markers at ids 0 and 1.
    pub fn with_markers() -> Self {
        let mut vocab = Self {
            surfaces: Vec::new(),
            index: HashMap::new(),
            bos: BOS,
            eos: EOS,
        };
        vocab.intern(BOS_SURFACE);
        vocab.intern(EOS_SURFACE);
        vocab
    }

    pub fn from_surfaces(surfaces: Vec<String>, bos: TokenId, eos: TokenId) -> Result<Self> {
        if surfaces.is_empty() {
            return Err(Error::Protocol("empty vocabulary".into()));
        }
        let mut index = HashMap::with_capacity(surfaces.len());
        for (id, s) in surfaces.iter().enumerate() {
            if index.insert(s.clone(), id as TokenId).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary entry {s:?}")));
            }
        }
        let n = surfaces.len();
        if bos as usize >= n || eos as usize >= n || bos == eos {
            return Err(Error::Format(format!(
                "marker ids bos={bos} eos={eos} invalid for {n} entries"
            )));
        }
        Ok(Self {
            surfaces,
            index,
            bos,
            eos,
        })
    }

    /// Id of `surface`, adding it if absent.
    pub fn intern(&mut self, surface: &str) -> TokenId {
        if let Some(&id) = self.index.get(surface) {
            return id;
        }
        let id = self.surfaces.len() as TokenId;
        self.surfaces.push(surface.to_owned());
        self.index.insert(surface.to_owned(), id);
        id
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.surfaces.get(id as usize).map(String::as_str)
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }

    pub fn len(&self) -> usize {
        self.surfaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.surfaces.is_empty()
    }

    pub fn bos(&self) -> TokenId {
        self.bos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn is_marker(&self, id: TokenId) -> bool {
        id == self.bos || id == self.eos
    }

    /// Hex SHA-256 over the marker ids and every length-prefixed surface.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.bos.to_le_bytes());
        hasher.update(self.eos.to_le_bytes());
        for s in &self.surfaces {
            hasher.update((s.len() as u64).to_le_bytes());
            hasher.update(s.as_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
