//! Seeded random streams.
//!
//! Every random draw in the crate comes from a `ChaCha8Rng` whose 256-bit
//! seed is the SHA-256 digest of a base seed plus a list of labels
//! (channel name, error kind, cell coordinates, ...). Streams are therefore
//! independent of scheduling order and stable across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64, labels: &[&str]) -> Stream {
    ChaCha8Rng::from_seed(derive_seed(seed, labels))
}

pub fn derive_seed(seed: u64, labels: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for label in labels {
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
    }
    h.finalize().into()
}

/// A 64-bit child seed, for handing on to APIs that take a plain integer.
pub fn derive_u64(seed: u64, labels: &[&str]) -> u64 {
    let bytes = derive_seed(seed, labels);
    u64::from_le_bytes(bytes[..8].try_into().unwrap())
}
