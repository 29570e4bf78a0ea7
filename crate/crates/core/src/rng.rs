//! SplitMix64, the single PRNG used by the toolkit.
//!
//! Recurrence (all arithmetic wrapping mod 2^64):
//!
//! ```text
//! state += 0x9E3779B97F4A7C15
//! z = state
//! z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//! z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//! out = z ^ (z >> 31)
//! ```
//!
//! The same finalizer, applied to a key built from `(seed, view, x, y, channel)`,
//! gives the stateless per-pixel noise used by the simulator.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform integer in `0..bound` by rejection, so there is no modulo bias.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        let zone = u64::MAX - (u64::MAX - bound + 1) % bound;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % bound;
            }
        }
    }
}

/// Uniform in `(0, 1]` from the top 53 bits of `v`.
#[inline]
fn unit_open0(v: u64) -> f64 {
    ((v >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sample addressed by a key tuple; independent of evaluation order.
pub fn gaussian_at(seed: u64, stream: u64, x: u64, y: u64, channel: u64) -> f64 {
    let mut key = mix64(seed ^ GOLDEN_GAMMA);
    for part in [stream, x, y, channel] {
        key = mix64(key.wrapping_add(part).wrapping_add(GOLDEN_GAMMA));
    }
    let u1 = unit_open0(key);
    let u2 = unit_open0(mix64(key.wrapping_add(GOLDEN_GAMMA)));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_sequence() {
        // Published SplitMix64 outputs for seed 1234567.
        let mut rng = SplitMix64::new(1234567);
        let expected = [
            6457827717110365317u64,
            3203168211198807973,
            9817491932198370423,
            4593380528125082431,
            16408922859458223821,
        ];
        for e in expected {
            assert_eq!(rng.next_u64(), e);
        }
    }

    #[test]
    fn below_stays_in_range() {
        let mut rng = SplitMix64::new(7);
        for bound in [1u64, 2, 3, 10, 1 << 40] {
            for _ in 0..200 {
                assert!(rng.below(bound) < bound);
            }
        }
    }

    #[test]
    fn gaussian_moments() {
        let n = 200_000u64;
        let samples: Vec<f64> = (0..n).map(|i| gaussian_at(3, 0, i, 0, 0)).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.02, "{var}");
        assert_ne!(gaussian_at(3, 0, 1, 2, 0), gaussian_at(3, 1, 1, 2, 0));
    }
}
