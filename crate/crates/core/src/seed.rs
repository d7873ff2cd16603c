//! Seed derivation for reproducible experiments.
//!
//! A base seed plus a path of stream identifiers (noise level index, view
//! count index, collection, ...) is hashed through the SplitMix64
//! finalizer, so sibling streams never share a generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of stream identifiers.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019))))
}

/// Generator for one stream of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_seeds_differ_by_path() {
        let a = derive_seed(42, &[0, 1]);
        let b = derive_seed(42, &[1, 0]);
        let c = derive_seed(42, &[0, 1]);
        assert_ne!(a, b);
        assert_eq!(a, c);
        assert_ne!(derive_seed(42, &[]), derive_seed(43, &[]));
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let x: u64 = stream_rng(7, 0).random();
        let y: u64 = stream_rng(7, 1).random();
        let z: u64 = stream_rng(7, 0).random();
        assert_ne!(x, y);
        assert_eq!(x, z);
    }
}
