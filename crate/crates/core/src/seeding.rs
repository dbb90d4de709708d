//! Deterministic per-task random streams.
//!
//! Every parallel task (trajectory, trial, discretization step) draws from its
//! own ChaCha stream keyed by the master seed and the task's index path, so
//! results do not depend on how tasks are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a 64-bit key from a master seed and an index path.
pub fn derive_key(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &i| splitmix64(acc ^ splitmix64(i.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// Random stream for the task at `path` under `master`.
pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_key(master, path))
}

/// Stream domains, used as the first path component to keep unrelated
/// consumers of the same master seed apart.
pub mod domain {
    pub const SAMPLE: u64 = 1;
    pub const REVERSE: u64 = 2;
    pub const DISTINGUISH: u64 = 3;
    pub const DIRECTION: u64 = 4;
    pub const PERTURB: u64 = 5;
    pub const ESTIMATE: u64 = 6;
    pub const NET: u64 = 7;
    pub const MONTE_CARLO: u64 = 8;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[1, 2]).random();
        let b: u64 = stream(7, &[1, 2]).random();
        let c: u64 = stream(7, &[2, 1]).random();
        let d: u64 = stream(8, &[1, 2]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
