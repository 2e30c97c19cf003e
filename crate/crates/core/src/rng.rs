//! Counter-based Gaussian increments.
//!
//! Every draw is a pure function of `(seed, trajectory, channel, step)`: the
//! ChaCha8 key comes from the seed, the stream id from the trajectory, and the
//! word position from the step. One 64-byte block serves one step of one
//! trajectory; channel `ℓ` reads its two 64-bit words at offset `2ℓ`. Nothing
//! depends on the order in which trajectories are visited.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::math;

/// Independent real Wiener channels per trajectory.
pub const CHANNELS: usize = 3;

const WORDS_PER_STEP: u128 = 16;
const INITIAL_STREAM_BIT: u64 = 1 << 63;

/// Whether increments are drawn or forced to zero (a diagnostic mode).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Wiener,
    Zero,
}

#[derive(Debug, Clone)]
pub struct CounterRng {
    seed: u64,
    base: ChaCha8Rng,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn positioned(&self, stream: u64, word: u128) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(stream);
        rng.set_word_pos(word);
        rng
    }

    /// Standard normals for all channels of one trajectory step.
    pub fn standard_normals(&self, trajectory: u64, step: u64) -> [f64; CHANNELS] {
        assert!(trajectory < INITIAL_STREAM_BIT, "trajectory index out of range");
        let mut rng = self.positioned(trajectory, step as u128 * WORDS_PER_STEP);
        core::array::from_fn(|_| {
            let u = rng.next_u64();
            let v = rng.next_u64();
            box_muller(u, v)
        })
    }

    /// Standard normal for a single `(trajectory, channel, step)`.
    pub fn standard_normal(&self, trajectory: u64, channel: usize, step: u64) -> f64 {
        assert!(channel < CHANNELS, "channel out of range");
        let mut rng = self.positioned(trajectory, step as u128 * WORDS_PER_STEP + 4 * channel as u128);
        let u = rng.next_u64();
        let v = rng.next_u64();
        box_muller(u, v)
    }

    /// Uniform on `[0, 1)` used to pick the initial vector of a trajectory.
    pub fn initial_uniform(&self, trajectory: u64) -> f64 {
        assert!(trajectory < INITIAL_STREAM_BIT, "trajectory index out of range");
        unit_open_right(self.positioned(INITIAL_STREAM_BIT | trajectory, 0).next_u64())
    }
}

fn unit_open_right(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn box_muller(u: u64, v: u64) -> f64 {
    // u1 ∈ (0, 1] keeps the logarithm finite.
    let u1 = ((u >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = unit_open_right(v);
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2)
}

/// Increment source for an ensemble run.
#[derive(Debug, Clone)]
pub struct NoisePlan {
    rng: CounterRng,
    trajectories: usize,
    dt: f64,
    mode: NoiseMode,
}

impl NoisePlan {
    pub fn new(seed: u64, trajectories: usize, dt: f64) -> Self {
        Self {
            rng: CounterRng::new(seed),
            trajectories,
            dt,
            mode: NoiseMode::Wiener,
        }
    }

    pub fn with_mode(mut self, mode: NoiseMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn seed(&self) -> u64 {
        self.rng.seed()
    }

    pub fn trajectories(&self) -> usize {
        self.trajectories
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mode(&self) -> NoiseMode {
        self.mode
    }

    pub fn rng(&self) -> &CounterRng {
        &self.rng
    }

    /// `ΔW_ℓ ~ Normal(0, h)` for the step starting at grid index `step`.
    pub fn increments(&self, trajectory: usize, step: u64, h: f64) -> [f64; CHANNELS] {
        match self.mode {
            NoiseMode::Zero => [0.0; CHANNELS],
            NoiseMode::Wiener => {
                let s = math::sqrt(h);
                self.rng.standard_normals(trajectory as u64, step).map(|z| z * s)
            }
        }
    }
}
