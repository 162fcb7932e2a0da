//! Named, keyed random streams derived from a single 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::tree::BElement;

pub type Stream = ChaCha8Rng;

fn keyed(parts: &[&[u8]]) -> Stream {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Stream identified by `(seed, name)`.
pub fn stream(seed: u64, name: &str) -> Stream {
    keyed(&[&seed.to_le_bytes(), name.as_bytes()])
}

/// Stream identified by `(seed, name, index)`, for numbered replicates.
pub fn indexed_stream(seed: u64, name: &str, index: u64) -> Stream {
    keyed(&[&seed.to_le_bytes(), name.as_bytes(), &index.to_le_bytes()])
}

/// Stream owned by one element of `B`; drawing it never disturbs any other element.
pub fn element_stream(seed: u64, name: &str, b: &BElement) -> Stream {
    let key = format!("{}/{}", b.num(), b.den());
    keyed(&[&seed.to_le_bytes(), name.as_bytes(), key.as_bytes()])
}
