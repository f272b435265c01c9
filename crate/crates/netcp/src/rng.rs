//! Deterministic per-trial random streams.
//!
//! One 64-bit seed keys a ChaCha12 generator; each trial (or repetition)
//! gets its own counter-indexed stream, so trial t sees identical draws no
//! matter how work is scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub fn trial_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn draws(seed: u64, stream: u64, count: usize) -> Vec<f64> {
        let mut rng = trial_rng(seed, stream);
        (0..count).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        assert_eq!(draws(7, 3, 4), draws(7, 3, 4));
        assert_ne!(draws(7, 3, 4)[0], draws(7, 4, 4)[0]);
        assert_ne!(draws(7, 3, 4)[0], draws(8, 3, 4)[0]);
    }

    #[test]
    fn later_streams_do_not_depend_on_earlier_use() {
        // Reading stream 0 must not perturb stream 1.
        let _ = draws(42, 0, 100);
        assert_eq!(draws(42, 1, 1), draws(42, 1, 1));
    }
}
