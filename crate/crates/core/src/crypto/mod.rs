//! Deterministic primitives: block algebra, hashing, seeded randomness,
//! the fuzzy extractor and public-key encryption.

mod block;
mod fuzzy;
mod hash;
mod pke;
mod rng;

pub use block::{xor, Block, BlockParseError, Timestamp, BLOCK_LEN};
pub use fuzzy::{
    gen_fuzzy, rep_fuzzy, repetition_encode, Biometric, HelperData, Sigma, BIO_BITS, BIO_LEN,
    REPETITION, SIGMA_LEN,
};
pub use hash::{canon_block, h, HashAlg, Hasher, UnknownHash};
pub use pke::{pke_decrypt, pke_encrypt, pke_keygen, PkeError, PkeKeyPair, MAX_PLAINTEXT};
pub use rng::{rng_next_block, SeededRng};
