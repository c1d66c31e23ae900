//! Seeded random streams.
//!
//! Every randomized generator in the crate draws from ChaCha8 keyed by a
//! `u64` seed, with the ChaCha stream id selecting an independent substream
//! (for example one per round of a topology sequence). The algorithm name is
//! recorded in scenario configs so runs can be cross-checked elsewhere.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the generator, as written into scenario configs.
pub const RNG_ALGORITHM: &str = "chacha8";

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of the generator keyed by `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
