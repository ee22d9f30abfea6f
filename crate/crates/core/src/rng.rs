//! Seed derivation for independent random streams.
//!
//! Every stochastic component takes an explicit `u64` seed. Streams for
//! nested work items (series within a dataset, grid points within a series,
//! restarts within an ensemble) are derived by hashing the parent seed with
//! the item's key, so results do not depend on evaluation order or on the
//! number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a parent seed and a path of keys.
pub fn derive_seed(parent: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(parent), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Stream labels used when deriving seeds, kept distinct so that e.g. the
/// training split and the test split never share a stream.
pub mod stream {
    pub const TRAIN: u64 = 1;
    pub const TEST: u64 = 2;
    pub const PARAMS: u64 = 10;
    pub const INITIAL_STATE: u64 = 11;
    pub const DYNAMICS: u64 = 12;
    pub const OBSERVATION: u64 = 13;
    pub const SCHEDULE: u64 = 14;
    pub const LIKELIHOOD: u64 = 20;
    pub const SUBSAMPLE: u64 = 30;
    pub const VALIDATION: u64 = 31;
    pub const INIT: u64 = 40;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ_by_key_and_order() {
        let a = derive_seed(7, &[1, 2]);
        let b = derive_seed(7, &[2, 1]);
        let c = derive_seed(7, &[1, 3]);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(a, derive_seed(7, &[1, 2]));
    }
}
