//! Named, seeded random substreams.
//!
//! Every consumer of randomness gets its own ChaCha8 stream keyed by
//! `(seed, name, index)` through SHA-256, so frames or identities can be
//! generated in any order and still reproduce the sequential output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub fn substream(seed: u64, name: &str, index: u64) -> SimRng {
    let mut h = Sha256::new();
    h.update(b"bevtrack/substream/v1");
    h.update(seed.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(index.to_le_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}
