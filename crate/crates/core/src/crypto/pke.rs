//! Public-key encryption used once, on the sensor registration channel.
//!
//! X25519 ECIES with ChaCha20-Poly1305. Encryption is deterministic: the
//! ephemeral scalar is hashed from the recipient key and the plaintext, so a
//! whole run stays a function of its seed. The AEAD tag makes a wrong key an
//! explicit error instead of garbage output.

use chacha20poly1305::aead::Aead;
use chacha20poly1305::{ChaCha20Poly1305, Key, KeyInit, Nonce};
use serde::{Deserialize, Serialize};
use x25519_dalek::{PublicKey, StaticSecret};

use super::hash::h;
use super::rng::SeededRng;

pub const MAX_PLAINTEXT: usize = 64;
const KEY_LEN: usize = 32;
const TAG_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PkeError {
    #[error("plaintext is {0} bytes, limit is {MAX_PLAINTEXT}")]
    PlaintextTooLong(usize),
    #[error("ciphertext is malformed ({0} bytes)")]
    Malformed(usize),
    #[error("decryption failed: key mismatch or corrupted ciphertext")]
    DecryptionFailed,
    #[error("key must be {KEY_LEN} bytes, got {0}")]
    KeyLength(usize),
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PkeKeyPair {
    #[serde(with = "hex::serde")]
    pub public_key: Vec<u8>,
    #[serde(with = "hex::serde")]
    pub private_key: Vec<u8>,
}

impl std::fmt::Debug for PkeKeyPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PkeKeyPair")
            .field("public_key", &hex::encode(&self.public_key))
            .finish_non_exhaustive()
    }
}

fn key32(bytes: &[u8]) -> Result<[u8; KEY_LEN], PkeError> {
    bytes
        .try_into()
        .map_err(|_| PkeError::KeyLength(bytes.len()))
}

fn aead_key(shared: &[u8; 32], eph_pub: &[u8; 32], recipient: &[u8; 32]) -> ChaCha20Poly1305 {
    let k = h(&[b"akap-pke-key", shared, eph_pub, recipient]);
    ChaCha20Poly1305::new(Key::from_slice(&k.0))
}

pub fn pke_keygen(rng: &mut SeededRng) -> PkeKeyPair {
    let secret = StaticSecret::from(rng.next_block().0);
    let public = PublicKey::from(&secret);
    PkeKeyPair {
        public_key: public.as_bytes().to_vec(),
        private_key: secret.to_bytes().to_vec(),
    }
}

/// Ciphertext layout: ephemeral public key (32) || AEAD(m) || tag (16).
pub fn pke_encrypt(public_key: &[u8], m: &[u8]) -> Result<Vec<u8>, PkeError> {
    if m.len() > MAX_PLAINTEXT {
        return Err(PkeError::PlaintextTooLong(m.len()));
    }
    let recipient = key32(public_key)?;
    let eph = StaticSecret::from(h(&[b"akap-pke-eph", &recipient, m]).0);
    let eph_pub = PublicKey::from(&eph);
    let shared = eph.diffie_hellman(&PublicKey::from(recipient));
    let cipher = aead_key(shared.as_bytes(), eph_pub.as_bytes(), &recipient);
    let body = cipher
        .encrypt(Nonce::from_slice(&[0u8; 12]), m)
        .expect("chacha20poly1305 encryption of <=64 bytes cannot fail");
    let mut out = Vec::with_capacity(KEY_LEN + body.len());
    out.extend_from_slice(eph_pub.as_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

pub fn pke_decrypt(private_key: &[u8], c: &[u8]) -> Result<Vec<u8>, PkeError> {
    if c.len() < KEY_LEN + TAG_LEN {
        return Err(PkeError::Malformed(c.len()));
    }
    let secret = StaticSecret::from(key32(private_key)?);
    let recipient = PublicKey::from(&secret);
    let eph_pub: [u8; 32] = c[..KEY_LEN].try_into().expect("length checked");
    let shared = secret.diffie_hellman(&PublicKey::from(eph_pub));
    let cipher = aead_key(shared.as_bytes(), &eph_pub, recipient.as_bytes());
    cipher
        .decrypt(Nonce::from_slice(&[0u8; 12]), &c[KEY_LEN..])
        .map_err(|_| PkeError::DecryptionFailed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_lengths() {
        let keys = pke_keygen(&mut SeededRng::new([1; 32]));
        for len in 0..=MAX_PLAINTEXT {
            let m: Vec<u8> = (0..len as u8).collect();
            let c = pke_encrypt(&keys.public_key, &m).unwrap();
            assert_eq!(pke_decrypt(&keys.private_key, &c).unwrap(), m);
        }
    }

    #[test]
    fn ciphertext_differs_from_plaintext() {
        let mut rng = SeededRng::new([2; 32]);
        let keys = pke_keygen(&mut rng);
        for _ in 0..100 {
            let m = rng.next_block();
            let c = pke_encrypt(&keys.public_key, &m.0).unwrap();
            assert_ne!(c, m.0.to_vec());
            assert!(!c.windows(32).any(|w| w == m.0));
        }
    }

    #[test]
    fn cross_key_decryption_fails() {
        for i in 0..100u8 {
            let a = pke_keygen(&mut SeededRng::new([i; 32]));
            let b = pke_keygen(&mut SeededRng::new([i.wrapping_add(100); 32]));
            let c = pke_encrypt(&a.public_key, b"pid").unwrap();
            assert_eq!(
                pke_decrypt(&b.private_key, &c),
                Err(PkeError::DecryptionFailed)
            );
        }
    }

    #[test]
    fn oversize_and_truncated_inputs() {
        let keys = pke_keygen(&mut SeededRng::new([4; 32]));
        assert_eq!(
            pke_encrypt(&keys.public_key, &[0; 65]),
            Err(PkeError::PlaintextTooLong(65))
        );
        assert_eq!(
            pke_decrypt(&keys.private_key, &[0; 10]),
            Err(PkeError::Malformed(10))
        );
        assert_eq!(pke_encrypt(&[0; 5], b"x"), Err(PkeError::KeyLength(5)));
    }

    #[test]
    fn flipped_ciphertext_bit_is_rejected() {
        let keys = pke_keygen(&mut SeededRng::new([8; 32]));
        let mut c = pke_encrypt(&keys.public_key, &[0x11; 32]).unwrap();
        c[40] ^= 1;
        assert_eq!(
            pke_decrypt(&keys.private_key, &c),
            Err(PkeError::DecryptionFailed)
        );
    }
}
