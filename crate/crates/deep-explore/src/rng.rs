//! Seed derivation.
//!
//! Every run derives one rng per (component, index) pair from a single master
//! seed. Streams are independent, so adding a draw site to one component does
//! not perturb any other component's stream.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// splitmix64 finalizer; full-period 64-bit mixer.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a over the tag bytes.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derives a deterministic child seed from (master, component tag, index).
pub fn derive_seed(master: u64, component: &str, index: u64) -> u64 {
    mix(mix(master ^ tag_hash(component)).wrapping_add(index))
}

/// A seeded rng for one component stream of a run.
pub fn component_rng(master: u64, component: &str, index: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(derive_seed(master, component, index))
}
