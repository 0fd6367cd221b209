//! Counter-based random streams.
//!
//! Every draw is a pure function of `(seed, particle, step, purpose)`: a key
//! is derived by chained SplitMix64 finalizers and a short SplitMix64
//! sequence is run from that key. Draws are therefore independent of
//! thread scheduling and of the order in which particles are visited.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What a draw is used for. Each purpose is a disjoint sub-stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Increment,
    InitialPosition,
    InitialSign,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Increment => 0x1,
            Purpose::InitialPosition => 0x2,
            Purpose::InitialSign => 0x3,
        }
    }
}

/// SplitMix64 generator started from a derived key. Implements `RngCore`
/// so the standard samplers of `rand_distr` can draw from it.
#[derive(Clone, Debug)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    pub fn keyed(seed: u64, particle: u64, step: u64, purpose: Purpose) -> Self {
        let mut k = mix64(seed.wrapping_add(GOLDEN_GAMMA));
        k = mix64(k ^ purpose.tag().wrapping_mul(0xD6E8_FEB8_6659_FD93));
        k = mix64(k ^ particle.wrapping_mul(0xA076_1D64_78BD_642F));
        k = mix64(k ^ step.wrapping_mul(0xE703_7ED1_A0B4_28DB));
        CounterRng { state: k }
    }
}

impl RngCore for CounterRng {
    #[inline(always)]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline(always)]
    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

/// A seedable noise source for the particle engine.
///
/// `antithetic` negates every Gaussian increment, which turns the stream
/// into the exact mirror image of the plain one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseStream {
    pub seed: u64,
    pub antithetic: bool,
}

impl NoiseStream {
    pub fn new(seed: u64) -> Self {
        NoiseStream {
            seed,
            antithetic: false,
        }
    }

    pub fn mirrored(self) -> Self {
        NoiseStream {
            antithetic: !self.antithetic,
            ..self
        }
    }

    #[inline]
    pub fn normal(&self, particle: u64, step: u64) -> f64 {
        let mut rng = CounterRng::keyed(self.seed, particle, step, Purpose::Increment);
        let z: f64 = rng.sample(StandardNormal);
        if self.antithetic {
            -z
        } else {
            z
        }
    }

    /// Uniform on the open interval (0, 1).
    #[inline]
    pub fn uniform(&self, particle: u64, purpose: Purpose) -> f64 {
        let mut rng = CounterRng::keyed(self.seed, particle, 0, purpose);
        open_unit(rng.next_u64())
    }
}

#[inline(always)]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}
