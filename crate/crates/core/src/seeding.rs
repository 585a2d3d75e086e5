//! Per-subsystem random streams derived from the master seed.
//!
//! Each stream is a ChaCha8 generator keyed by SHA-256 of the master seed and
//! a stream label, so adding draws to one subsystem never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

pub const ORDERS: &str = "orders";
pub const SETUP: &str = "setup";
pub const WANDER: &str = "wander";
pub const KMEANS: &str = "kmeans";

pub fn stream(seed: u64, label: &str) -> SimRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}
