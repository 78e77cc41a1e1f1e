//! Named random streams derived from a single master seed.
//!
//! Every stochastic component draws from its own stream so that adding or
//! reordering one consumer never perturbs another. The derivation rule is
//!
//! ```text
//! seed(master, label, index) = splitmix64(master ^ fnv1a64(label) ^ splitmix64(index))
//! ```
//!
//! and the stream itself is ChaCha8 seeded from that 64-bit value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const STREAM_INIT: &str = "init";
pub const STREAM_SHUFFLE: &str = "shuffle";
pub const STREAM_CORRUPTION: &str = "corruption";
pub const STREAM_MISALIGN: &str = "misalign";
pub const STREAM_PHASE: &str = "phase";
pub const STREAM_NOISE: &str = "noise";
pub const STREAM_CORPUS: &str = "corpus";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a64(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a64(label) ^ splitmix64(index))
}

pub fn stream(master: u64, label: &str) -> Rng {
    indexed_stream(master, label, 0)
}

pub fn indexed_stream(master: u64, label: &str, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, label, index))
}
