//! Counter-addressed random streams.
//!
//! Every random draw in the crate is addressed by a key tuple rather than by the
//! position in a sequential stream, so results do not depend on iteration order
//! or on how work is split across threads. The backing generator is ChaCha8:
//! the key seeds the cipher, a 64-bit stream id selects an independent
//! keystream and the word position selects the draw inside it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Stream-id domains. Keeping them disjoint means a disorder draw can never
/// alias a sampling draw for the same seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Disorder = 1,
    Realization = 2,
    Sampling = 3,
    Noise = 4,
    Subsample = 5,
    MonteCarlo = 6,
}

fn stream_id(domain: Domain, a: u64, b: u64) -> u64 {
    // 8 bits domain | 28 bits a | 28 bits b
    ((domain as u64) << 56) | ((a & 0x0fff_ffff) << 28) | (b & 0x0fff_ffff)
}

/// A generator positioned at the start of the stream `(seed, domain, a, b)`.
pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(domain, a, b));
    rng
}

/// One uniform draw in `[0, 1)` addressed by `(seed, domain, a, b, word)`.
pub fn uniform_at(seed: u64, domain: Domain, a: u64, b: u64, word: u64) -> f64 {
    let mut rng = stream(seed, domain, a, b);
    // each u64 consumes two 32-bit words
    rng.set_word_pos(u128::from(word) * 2);
    rng.random::<f64>()
}

/// Derives the seed of one disorder realization from the ensemble seed.
pub fn realization_seed(seed: u64, realization: u64) -> u64 {
    stream(seed, Domain::Realization, realization >> 28, realization).next_u64()
}
