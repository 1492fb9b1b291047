//! Seed derivation.
//!
//! Every random decision in the crate flows from one user seed. Sub-streams
//! (ensemble members, folds, trials, per-row noise draws) are derived from
//! `(seed, stream tag, index)` with a SplitMix64 finalizer, so results never
//! depend on the order in which parallel workers run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags keep independent uses of the same `(seed, index)` apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Member = 1,
    Fold = 2,
    Trial = 3,
    Noise = 4,
    KMeans = 5,
    Tree = 6,
    Bootstrap = 7,
    Features = 8,
    Synth = 9,
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed for the `index`-th item of `stream`.
pub fn derive_seed(seed: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(seed ^ (stream as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(a ^ splitmix64(index))
}

pub fn rng_for(seed: u64, stream: Stream, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, stream, index))
}

/// Counter-based uniform draw in `[0, 1)`: a pure function of its arguments.
pub fn uniform_at(seed: u64, stream: Stream, index: u64) -> f64 {
    (derive_seed(seed, stream, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stable 64-bit FNV-1a hash, used to place group keys.
pub fn hash_str(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}
