//! Deterministic RNG streams derived from a global seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent sub-streams for the randomized pipeline steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Split = 1,
    Synthesis = 2,
    Model = 3,
    Fixture = 4,
}

/// A generator fixed by (seed, purpose, index), e.g. one stream per MCCV round.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mixed = seed ^ (purpose as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(index);
    rng
}
