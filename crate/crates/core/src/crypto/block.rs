use std::fmt;
use std::ops::{BitXor, BitXorAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Digest length in bytes. Every hash output and every XOR operand is a [`Block`].
pub const BLOCK_LEN: usize = 32;

/// A fixed 32-byte value: the operand of XOR and the output of the hash.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Block(pub [u8; BLOCK_LEN]);

impl Block {
    pub const ZERO: Block = Block([0u8; BLOCK_LEN]);

    pub fn new(bytes: [u8; BLOCK_LEN]) -> Self {
        Block(bytes)
    }

    /// Fill every byte with `b`.
    pub fn repeat(b: u8) -> Self {
        Block([b; BLOCK_LEN])
    }

    pub fn from_slice(bytes: &[u8]) -> Option<Self> {
        <[u8; BLOCK_LEN]>::try_from(bytes).ok().map(Block)
    }

    pub fn as_bytes(&self) -> &[u8; BLOCK_LEN] {
        &self.0
    }

    pub fn xor(&self, other: &Block) -> Block {
        let mut out = [0u8; BLOCK_LEN];
        for (o, (a, b)) in out.iter_mut().zip(self.0.iter().zip(other.0.iter())) {
            *o = a ^ b;
        }
        Block(out)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }

    /// Flip one bit, `bit` counted from the most significant bit of byte 0.
    pub fn flip_bit(&self, bit: usize) -> Block {
        let mut out = *self;
        out.0[(bit / 8) % BLOCK_LEN] ^= 0x80 >> (bit % 8);
        out
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, BlockParseError> {
        let raw = hex::decode(s).map_err(|_| BlockParseError::Hex)?;
        Block::from_slice(&raw).ok_or(BlockParseError::Length(raw.len()))
    }

    /// First four bytes as eight hex characters.
    pub fn fingerprint(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

/// Bytewise exclusive-or of two blocks.
pub fn xor(a: &Block, b: &Block) -> Block {
    a.xor(b)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BlockParseError {
    #[error("block is not valid hex")]
    Hex,
    #[error("block must be {BLOCK_LEN} bytes, got {0}")]
    Length(usize),
}

impl BitXor for Block {
    type Output = Block;
    fn bitxor(self, rhs: Block) -> Block {
        self.xor(&rhs)
    }
}

impl BitXor<&Block> for &Block {
    type Output = Block;
    fn bitxor(self, rhs: &Block) -> Block {
        self.xor(rhs)
    }
}

impl BitXorAssign for Block {
    fn bitxor_assign(&mut self, rhs: Block) {
        *self = self.xor(&rhs);
    }
}

impl AsRef<[u8]> for Block {
    fn as_ref(&self) -> &[u8] {
        &self.0
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block({})", self.to_hex())
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Block {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Block {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Block::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Logical timestamp, encoded as 8 bytes big-endian wherever it is hashed or framed.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn to_be_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }

    /// Absolute distance in ticks.
    pub fn distance(self, other: Timestamp) -> u64 {
        self.0.abs_diff(other.0)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}
