//! Named random substreams derived from a 64-bit seed.
//!
//! Every consumer of randomness gets its own ChaCha8 stream keyed by a hash of
//! (seed, stream tag, indices...). Streams never share state, so the order in
//! which they are consumed (and the number of threads doing it) cannot change
//! any drawn value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer: a bijective 64-bit avalanche permutation.
#[inline]
pub fn avalanche(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a sequence of words. Each word is absorbed as
/// `h = avalanche(h ^ avalanche(word + (i + 1)·φ))`, starting from `h = φ`.
pub fn mix(parts: &[u64]) -> u64 {
    let mut h = GOLDEN;
    for (i, &p) in parts.iter().enumerate() {
        let salted = p.wrapping_add(GOLDEN.wrapping_mul(i as u64 + 1));
        h = avalanche(h ^ avalanche(salted));
    }
    h
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    InitSolutions = 0x11,
    InitPreferences = 0x12,
    FitnessCases = 0x13,
    Breeding = 0x14,
}

pub fn stream(seed: u64, which: Stream) -> StreamRng {
    StreamRng::seed_from_u64(mix(&[seed, which as u64]))
}

/// Substream for offspring `couple` of generation `generation`.
pub fn breeding_stream(seed: u64, generation: u64, couple: u64) -> StreamRng {
    StreamRng::seed_from_u64(mix(&[seed, Stream::Breeding as u64, generation, couple]))
}
