//! Seed handling and reproducible substreams.
//!
//! All randomized routines in this crate take `&mut impl Rng`, so callers own
//! the generator. For parallel work we derive one independent ChaCha stream
//! per unit of work from a master seed and the unit's index; merging results
//! in index order then makes the whole computation independent of thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Mix a 64-bit state into a well-distributed output (SplitMix64 finalizer).
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for a `(seed, stream)` pair.
///
/// Distinct `stream` values give statistically independent generators; the
/// same pair always gives the same stream, regardless of how many other
/// streams exist or which thread runs it.
pub fn substream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = seed ^ stream.rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// Root generator for a seed (stream 0).
pub fn root(seed: u64) -> ChaCha12Rng {
    substream(seed, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn substreams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| substream(7, 3).random()).collect();
        let b: Vec<u64> = (0..4).map(|_| substream(7, 3).random()).collect();
        assert_eq!(a, b);

        let x: u64 = substream(7, 3).random();
        let y: u64 = substream(7, 4).random();
        let z: u64 = substream(8, 3).random();
        assert_ne!(x, y);
        assert_ne!(x, z);
    }
}
