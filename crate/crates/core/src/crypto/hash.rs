use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256, Sha512_256};

use super::block::{Block, BLOCK_LEN};

/// Hash family used for every `h(..)` in the scheme. Both produce 32-byte digests.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum HashAlg {
    #[default]
    #[serde(rename = "sha256")]
    Sha256,
    #[serde(rename = "sha512-256")]
    Sha512_256,
}

impl HashAlg {
    pub const ALL: [HashAlg; 2] = [HashAlg::Sha256, HashAlg::Sha512_256];

    pub fn name(self) -> &'static str {
        match self {
            HashAlg::Sha256 => "sha256",
            HashAlg::Sha512_256 => "sha512-256",
        }
    }

    pub fn hasher(self) -> Hasher {
        match self {
            HashAlg::Sha256 => Hasher::Sha256(Sha256::new()),
            HashAlg::Sha512_256 => Hasher::Sha512_256(Sha512_256::new()),
        }
    }

    /// Digest of the raw concatenation of `parts`, in order.
    pub fn h(self, parts: &[&[u8]]) -> Block {
        let mut hasher = self.hasher();
        for part in parts {
            hasher.update(part);
        }
        hasher.finalize()
    }

    /// Map a variable-length value onto a block, domain-separated by `tag`.
    ///
    /// Used wherever a raw secret (a password, a sensor identity) has to take
    /// part in an XOR with a digest.
    pub fn canon_block(self, tag: &str, raw: &[u8]) -> Block {
        debug_assert!(!tag.is_empty(), "canon_block tag must be nonempty");
        self.h(&[tag.as_bytes(), raw])
    }
}

impl fmt::Display for HashAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown hash algorithm `{0}` (expected sha256 or sha512-256)")]
pub struct UnknownHash(pub String);

impl FromStr for HashAlg {
    type Err = UnknownHash;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sha256" | "sha-256" => Ok(HashAlg::Sha256),
            "sha512-256" | "sha512_256" | "sha-512/256" => Ok(HashAlg::Sha512_256),
            _ => Err(UnknownHash(s.to_string())),
        }
    }
}

/// Incremental hasher; cloning snapshots the absorbed prefix.
#[derive(Clone)]
pub enum Hasher {
    Sha256(Sha256),
    Sha512_256(Sha512_256),
}

impl Hasher {
    pub fn update(&mut self, data: &[u8]) {
        match self {
            Hasher::Sha256(h) => h.update(data),
            Hasher::Sha512_256(h) => h.update(data),
        }
    }

    pub fn finalize(self) -> Block {
        let mut out = [0u8; BLOCK_LEN];
        match self {
            Hasher::Sha256(h) => out.copy_from_slice(&h.finalize()),
            Hasher::Sha512_256(h) => out.copy_from_slice(&h.finalize()),
        }
        Block(out)
    }
}

/// `h(..)` under the default hash (SHA-256).
pub fn h(parts: &[&[u8]]) -> Block {
    HashAlg::Sha256.h(parts)
}

/// [`HashAlg::canon_block`] under the default hash.
pub fn canon_block(tag: &str, raw: &[u8]) -> Block {
    HashAlg::Sha256.canon_block(tag, raw)
}
