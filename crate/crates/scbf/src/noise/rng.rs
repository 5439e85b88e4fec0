//! Counter-keyed standard normals: draw `n` of stream `s` under `seed` is a
//! pure function of `(seed, s, n)`, independent of what else was drawn.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

/// Sequential reader positioned at draw `start` of one stream.
pub(crate) struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    pub fn at(seed: u64, stream: u64, start: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        // four 32-bit words per draw
        rng.set_word_pos(4 * start as u128);
        Self { rng }
    }

    /// Box-Muller on two 53-bit uniforms; always consumes four words.
    pub fn next(&mut self) -> f64 {
        let a = self.rng.next_u64() >> 11;
        let b = self.rng.next_u64() >> 11;
        let scale = 1.0 / (1u64 << 53) as f64;
        let u1 = (a as f64 + 1.0) * scale;
        let u2 = b as f64 * scale;
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }
}

pub(crate) fn normal(seed: u64, stream: u64, index: u64) -> f64 {
    NormalStream::at(seed, stream, index).next()
}
