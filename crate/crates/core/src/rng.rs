//! Seeded random streams.
//!
//! Every stochastic operation takes its stream as an argument. Nested Monte
//! Carlo levels derive child streams by drawing a fresh 64-bit seed from the
//! parent, so the number of parent draws never depends on model parameters
//! and sweeps over a parameter reuse the same underlying randomness.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The concrete stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Stream seeded directly from a user seed.
pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream for a labelled sub-computation of a seed, e.g. `substream(seed, 3)`
/// for the MI stage. Labels are mixed with SplitMix64 so neighbouring labels
/// give unrelated streams.
pub fn substream(seed: u64, label: u64) -> Stream {
    stream(splitmix64(seed ^ splitmix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15))))
}

/// Draw a child stream from a parent stream.
pub fn child<R: RngCore + ?Sized>(parent: &mut R) -> Stream {
    stream(parent.next_u64())
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
