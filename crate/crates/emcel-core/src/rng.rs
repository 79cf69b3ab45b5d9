//! Deterministic, parallel-safe randomness.
//!
//! Seed derivation, fixed forever as part of the output contract:
//!
//! 1. path `i` of a run gets `path_seed = splitmix64(base_seed + i·GOLDEN)`
//!    ([`mix_seed`]),
//! 2. the path's coins come from a ChaCha12 stream whose 256-bit key is the
//!    first four SplitMix64 outputs of the stream seeded at `path_seed`,
//! 3. coins are the low-to-high bits of successive 64-bit ChaCha words.
//!
//! Rerunning a configuration with the same base seed reproduces every path
//! bit for bit, regardless of thread count or scheduling.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};

/// Human-readable description of the generator, recorded in run manifests.
pub const RNG_DESCRIPTION: &str = "per-path ChaCha12; path_seed = splitmix64(base_seed + i*0x9E3779B97F4A7C15); \
     key = splitmix64 outputs 1..4 from path_seed; coins = low-to-high bits of 64-bit words";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 step: output for the state `x`, i.e. `finalize(x + GOLDEN)`.
#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for path `i` of a run with the given base seed. Fixed forever.
#[inline]
pub fn mix_seed(base_seed: u64, i: u64) -> u64 {
    splitmix64(base_seed.wrapping_add(i.wrapping_mul(GOLDEN)))
}

fn chacha_key(path_seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    for (lane, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(path_seed.wrapping_add((lane as u64).wrapping_mul(GOLDEN)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    key
}

/// A stream of fair ±1 coins for one path.
pub struct CoinStream {
    rng: ChaCha12Rng,
    buf: u64,
    left: u8,
}

impl CoinStream {
    /// Stream for a raw path seed.
    pub fn from_seed(path_seed: u64) -> Self {
        CoinStream { rng: ChaCha12Rng::from_seed(chacha_key(path_seed)), buf: 0, left: 0 }
    }

    /// Stream for path `path_index` of the run seeded by `base_seed`.
    pub fn for_path(base_seed: u64, path_index: u64) -> Self {
        CoinStream::from_seed(mix_seed(base_seed, path_index))
    }

    /// Next coin: `true` for an up move (+1), `false` for down (−1).
    #[inline]
    pub fn next_coin(&mut self) -> bool {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let bit = self.buf & 1;
        self.buf >>= 1;
        self.left -= 1;
        bit == 1
    }

    /// Next raw 64-bit word, for callers doing their own bit bookkeeping.
    /// Interleaving this with [`CoinStream::next_coin`] changes the stream;
    /// use one access style per stream.
    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Next coin as ±1.0.
    #[inline]
    pub fn next_sign(&mut self) -> f64 {
        if self.next_coin() {
            1.0
        } else {
            -1.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_seed_is_stable() {
        // Frozen values: the derivation is part of the reproducibility contract.
        assert_eq!(mix_seed(0, 0), 16294208416658607535);
        assert_eq!(mix_seed(42, 0), 13679457532755275413);
        assert_eq!(mix_seed(42, 1), 2949826092126892291);
    }

    #[test]
    fn for_path_is_from_seed_of_the_mixed_seed() {
        let mut a = CoinStream::for_path(7, 3);
        let mut b = CoinStream::from_seed(mix_seed(7, 3));
        for _ in 0..256 {
            assert_eq!(a.next_coin(), b.next_coin());
        }
    }

    #[test]
    fn distinct_paths_get_distinct_streams() {
        let a: Vec<bool> = {
            let mut s = CoinStream::for_path(7, 0);
            (0..64).map(|_| s.next_coin()).collect()
        };
        let b: Vec<bool> = {
            let mut s = CoinStream::for_path(7, 1);
            (0..64).map(|_| s.next_coin()).collect()
        };
        assert_ne!(a, b);
    }

    #[test]
    fn words_and_coins_agree() {
        let mut by_word = CoinStream::for_path(11, 0);
        let mut by_coin = CoinStream::for_path(11, 0);
        for _ in 0..3 {
            let w = by_word.next_word();
            for j in 0..64 {
                assert_eq!((w >> j) & 1 == 1, by_coin.next_coin());
            }
        }
    }

    #[test]
    fn stream_is_reproducible() {
        let mut s1 = CoinStream::for_path(123, 9);
        let mut s2 = CoinStream::for_path(123, 9);
        for _ in 0..1000 {
            assert_eq!(s1.next_coin(), s2.next_coin());
        }
    }

    #[test]
    fn coin_frequency_is_roughly_fair() {
        let mut s = CoinStream::for_path(2024, 0);
        let n = 1_000_000u32;
        let ups: u32 = (0..n).map(|_| s.next_coin() as u32).sum();
        let freq = ups as f64 / n as f64;
        // 3 sigma band around 1/2 for a fair coin
        assert!((freq - 0.5).abs() < 3.0 * 0.5 / (n as f64).sqrt(), "freq = {freq}");
    }
}
