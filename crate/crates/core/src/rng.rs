//! Seed-derived random streams.
//!
//! Every stream is keyed by `(master seed, purpose, key)` and seeded from a
//! SHA-256 digest of those three values, so streams for different purposes
//! or vehicles never share state and do not depend on the order in which
//! they are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Shadowing draws, one stream per window.
    Shadowing,
    /// Primary selection and SPS period draws, one stream per vehicle.
    Scheduler,
    /// Auxiliary replica placement, one stream per vehicle.
    Replicas,
    /// Synthetic mobility generation.
    Mobility,
}

impl Purpose {
    fn tag(self) -> &'static [u8] {
        match self {
            Purpose::Shadowing => b"shadowing",
            Purpose::Scheduler => b"scheduler",
            Purpose::Replicas => b"replicas",
            Purpose::Mobility => b"mobility",
        }
    }
}

pub fn stream(seed: u64, purpose: Purpose, key: &[u8]) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((purpose.tag().len() as u32).to_le_bytes());
    hasher.update(purpose.tag());
    hasher.update(key);
    ChaCha8Rng::from_seed(hasher.finalize().into())
}

pub fn vehicle_stream(seed: u64, purpose: Purpose, vehicle_id: &str) -> StreamRng {
    stream(seed, purpose, vehicle_id.as_bytes())
}

pub fn counter_stream(seed: u64, purpose: Purpose, counter: u64) -> StreamRng {
    stream(seed, purpose, &counter.to_le_bytes())
}
