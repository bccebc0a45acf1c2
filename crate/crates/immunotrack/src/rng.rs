//! Deterministic RNG substreams.
//!
//! Every random draw in the system comes from a `ChaCha8Rng` keyed by the
//! master seed plus a domain tag and up to three context words. Clone
//! mutation gets one stream per `(generation, tracker id, clone index)`,
//! so results are bit-identical regardless of execution order or degree
//! of parallelism.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOMAIN_INIT: u64 = 0x1656_67b1_9e37_79f9;
const DOMAIN_MUTATE: u64 = 0x9e37_79b9_7f4a_7c15;
const DOMAIN_SYNTH: u64 = 0xc2b2_ae3d_27d4_eb4f;

fn stream(words: [u64; 4]) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    for (chunk, word) in seed.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Stream for drawing the initial tracker population.
pub fn init_stream(seed: u64) -> ChaCha8Rng {
    stream([seed ^ DOMAIN_INIT, 0, 0, 0])
}

/// Stream for mutating one clone of one tracker in one generation.
pub fn mutation_stream(
    seed: u64,
    generation: usize,
    tracker_id: u64,
    clone_index: usize,
) -> ChaCha8Rng {
    stream([
        seed ^ DOMAIN_MUTATE,
        generation as u64,
        tracker_id,
        clone_index as u64,
    ])
}

/// Stream for the synthetic series generators.
pub fn synth_stream(seed: u64) -> ChaCha8Rng {
    stream([seed ^ DOMAIN_SYNTH, 0, 0, 0])
}
