//! Counter-based uniform streams.
//!
//! The `t`-th uniform of a stream is a pure function of `(seed, stream_id, t)`:
//! the stream is ChaCha8 keyed by `seed` with ChaCha stream number `stream_id`,
//! and draw `t` consumes 64-bit word `t`. Replicate seeds are derived from a master
//! seed with [`replicate_seed`].

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Identifier of the derivation rule used by [`replicate_seed`], embedded in study output.
pub const SEED_RULE: &str = "splitmix64(master ^ splitmix64(index + 0x9E3779B97F4A7C15))";

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under master seed `master`. Independent of execution order.
pub fn replicate_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

/// Map 64 random bits to a uniform on `[0, 1)` with 53-bit resolution.
#[inline]
pub fn bits_to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Sequential reader over a counter-based uniform stream.
#[derive(Clone, Debug)]
pub struct UniformStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream_id: u64,
}

impl UniformStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            rng,
            seed,
            stream_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Next uniform on `[0, 1)`.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        bits_to_unit(self.rng.next_u64())
    }

    /// Position the stream so the next draw is uniform number `t` (0-based).
    pub fn seek(&mut self, t: u64) {
        // one u64 draw consumes two 32-bit words
        self.rng.set_word_pos(u128::from(t) * 2);
    }

    /// Uniform number `t` of the stream, without disturbing the sequential position.
    pub fn uniform_at(&self, t: u64) -> f64 {
        let mut probe = self.rng.clone();
        probe.set_word_pos(u128::from(t) * 2);
        bits_to_unit(probe.next_u64())
    }
}

impl RngCore for UniformStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
