//! Pinned pseudorandom recurrence used for weights and synthetic inputs.
//!
//! The generator is SplitMix64: the state advances by the golden-ratio
//! increment `0x9E37_79B9_7F4A_7C15` and each output is the state passed
//! through the finalizer
//!
//! ```text
//! z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9
//! z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB
//! z =  z ^ (z >> 31)
//! ```
//!
//! (wrapping arithmetic). Uniforms take the top 53 bits: `(z >> 11) * 2^-53`,
//! which lies in `[0, 1)`. Normal variates use the Marsaglia polar method:
//! draw `u = 2U - 1`, `v = 2U - 1` from two consecutive uniforms, reject while
//! `s = u² + v²` is `0` or `>= 1`, then emit `u·m` followed by `v·m` with
//! `m = sqrt(-2 ln s / s)`. `sqrt` and `ln` come from `libm`, so the stream is
//! identical on every platform.

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(Self::GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..bound` by modulo reduction. `bound` must be
    /// non-zero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }

    /// Derives an independent generator seeded from this one's next output.
    pub fn split(&mut self) -> Self {
        Self::new(self.next_u64())
    }
}

/// Standard normal variates drawn with the polar method.
#[derive(Debug, Clone)]
pub struct NormalStream {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self::from_rng(SplitMix64::new(seed))
    }

    pub fn from_rng(rng: SplitMix64) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.rng.next_f64() - 1.0;
            let v = 2.0 * self.rng.next_f64() - 1.0;
            let s = u * u + v * v;
            if s == 0.0 || s >= 1.0 {
                continue;
            }
            let m = libm::sqrt(-2.0 * libm::log(s) / s);
            self.spare = Some(v * m);
            return u * m;
        }
    }
}
