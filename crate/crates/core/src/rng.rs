//! Labeled seed derivation.
//!
//! Every random stream in the crate is derived from one top-level seed plus
//! a stage label and a list of indices, so any stage can be re-run on its
//! own and parallel work is independent of scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StageRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `seed`, a stage label and a list of indices into a new seed.
pub fn derive_seed(seed: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for b in label.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    // separator so ("ab", [1]) and ("a", [..]) never collide through bytes
    h = splitmix64(h ^ 0xFF_FF);
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    h
}

pub fn stage_rng(seed: u64, label: &str, indices: &[u64]) -> StageRng {
    StageRng::seed_from_u64(derive_seed(seed, label, indices))
}
