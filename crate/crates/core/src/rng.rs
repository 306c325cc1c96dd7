//! Counter-based random streams.
//!
//! Every random draw in a run is taken from a fresh ChaCha8 generator seeded
//! from `(run seed, agent, iteration, purpose)`. No generator state survives
//! across iterations, so serial and intra-round-parallel execution consume
//! randomness identically and runs are reproducible from the seed alone.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is consumed for. Distinct purposes never share a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// Component-index draw for the gradient estimate.
    Sample,
    /// Anchor-refresh coin.
    Trigger,
    /// Initial state draws.
    Init,
    /// Trigger-probability interval sampling.
    ProbInterval,
    /// Graph edge sampling.
    Graph,
    /// Dataset synthesis and partition shuffling.
    Data,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Sample => 0x01,
            Purpose::Trigger => 0x02,
            Purpose::Init => 0x03,
            Purpose::ProbInterval => 0x04,
            Purpose::Graph => 0x05,
            Purpose::Data => 0x06,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the dedicated generator for `(seed, agent, iter, purpose)`.
pub fn stream(seed: u64, agent: usize, iter: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut state = seed ^ 0xD1B5_4A32_D192_ED03;
    state = state.wrapping_add(splitmix64(&mut { agent as u64 ^ 0xA5A5 }));
    let mut mix = state
        .wrapping_mul(0x2545_F491_4F6C_DD1D)
        .wrapping_add(agent as u64)
        .wrapping_add(iter.wrapping_mul(0x9E37_79B9))
        .wrapping_add(purpose.tag() << 56);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut mix).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Standard normal via Box-Muller on the given stream.
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // gen::<f64>() lies in [0,1); shift to (0,1] so the log is finite.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Fills `out` with standard normal draws.
pub fn fill_standard_normal(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for slot in out.iter_mut() {
        *slot = standard_normal(rng);
    }
}
