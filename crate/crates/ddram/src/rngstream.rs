//! Reproducible parallel RNG streams.
//!
//! Every chain (and every auxiliary purpose, like reference sampling or
//! metric projections) gets its own counter-based stream derived from
//! `(seed, chain index, purpose tag)` through a cryptographic hash. Streams
//! are therefore independent of thread scheduling: running 10⁵ chains on 1
//! or 64 workers produces identical per-chain draws.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a deterministic, platform-independent stream.
pub fn stream(seed: u64, chain: u64, purpose: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(chain.to_le_bytes());
    hasher.update(purpose.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_deterministic() {
        let a: Vec<f64> = stream(7, 3, "noise").sample_iter(rand::distributions::Standard).take(8).collect();
        let b: Vec<f64> = stream(7, 3, "noise").sample_iter(rand::distributions::Standard).take(8).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn streams_differ_across_chain_and_purpose() {
        let base: u64 = stream(7, 0, "noise").gen();
        assert_ne!(base, stream(7, 1, "noise").gen::<u64>());
        assert_ne!(base, stream(7, 0, "metric").gen::<u64>());
        assert_ne!(base, stream(8, 0, "noise").gen::<u64>());
    }
}
