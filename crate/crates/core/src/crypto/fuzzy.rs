//! Code-offset fuzzy extractor over a 5x repetition code.
//!
//! `Gen` draws a 128-bit key σ, spreads every key bit over five biometric
//! bits, and publishes the offset τ = Encode(σ) ⊕ bio. `Rep` majority-decodes
//! τ ⊕ bio', so up to two flipped bits per five-bit group are corrected.
//! Bits are numbered most-significant first within each byte.

use std::fmt;

use super::rng::SeededRng;

pub const SIGMA_LEN: usize = 16;
pub const REPETITION: usize = 5;
pub const BIO_BITS: usize = SIGMA_LEN * 8 * REPETITION;
pub const BIO_LEN: usize = BIO_BITS / 8;

/// Extracted biometric key σ.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sigma(pub [u8; SIGMA_LEN]);

/// Public helper string τ.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct HelperData(pub [u8; BIO_LEN]);

/// A 640-bit biometric reading.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Biometric(pub [u8; BIO_LEN]);

fn get_bit(bytes: &[u8], i: usize) -> bool {
    bytes[i / 8] & (0x80 >> (i % 8)) != 0
}

fn set_bit(bytes: &mut [u8], i: usize, value: bool) {
    if value {
        bytes[i / 8] |= 0x80 >> (i % 8);
    } else {
        bytes[i / 8] &= !(0x80 >> (i % 8));
    }
}

/// Repeat every bit of `sigma` five times.
pub fn repetition_encode(sigma: &Sigma) -> [u8; BIO_LEN] {
    let mut out = [0u8; BIO_LEN];
    for i in 0..SIGMA_LEN * 8 {
        let bit = get_bit(&sigma.0, i);
        for k in 0..REPETITION {
            set_bit(&mut out, i * REPETITION + k, bit);
        }
    }
    out
}

fn majority_decode(word: &[u8; BIO_LEN]) -> Sigma {
    let mut out = [0u8; SIGMA_LEN];
    for i in 0..SIGMA_LEN * 8 {
        let ones = (0..REPETITION)
            .filter(|k| get_bit(word, i * REPETITION + k))
            .count();
        set_bit(&mut out, i, ones * 2 > REPETITION);
    }
    Sigma(out)
}

fn xor80(a: &[u8; BIO_LEN], b: &[u8; BIO_LEN]) -> [u8; BIO_LEN] {
    core::array::from_fn(|i| a[i] ^ b[i])
}

/// `Gen(bio) = (σ, τ)`; σ is the first 16 bytes of the next rng block.
pub fn gen_fuzzy(bio: &Biometric, rng: &mut SeededRng) -> (Sigma, HelperData) {
    let block = rng.next_block();
    let mut sigma = [0u8; SIGMA_LEN];
    sigma.copy_from_slice(&block.0[..SIGMA_LEN]);
    let sigma = Sigma(sigma);
    let tau = HelperData(xor80(&repetition_encode(&sigma), &bio.0));
    (sigma, tau)
}

/// `Rep(bio', τ)`. A reading too far from the enrolled one silently yields a different σ.
pub fn rep_fuzzy(bio_prime: &Biometric, tau: &HelperData) -> Sigma {
    majority_decode(&xor80(&tau.0, &bio_prime.0))
}

impl Biometric {
    pub fn flip_bit(&self, i: usize) -> Biometric {
        let mut out = self.0;
        out[i / 8] ^= 0x80 >> (i % 8);
        Biometric(out)
    }

    /// A reproducible synthetic reading drawn from `rng`.
    pub fn sample(rng: &mut SeededRng) -> Biometric {
        let mut out = [0u8; BIO_LEN];
        for chunk in out.chunks_mut(32) {
            let block = rng.next_block();
            chunk.copy_from_slice(&block.0[..chunk.len()]);
        }
        Biometric(out)
    }
}

macro_rules! hex_debug {
    ($($t:ident),*) => {$(
        impl fmt::Debug for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!(stringify!($t), "({})"), hex::encode(self.0))
            }
        }
        impl $t {
            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
            pub fn from_slice(bytes: &[u8]) -> Option<Self> {
                bytes.try_into().ok().map($t)
            }
        }
    )*};
}

hex_debug!(Sigma, HelperData, Biometric);
