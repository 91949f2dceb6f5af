//! Reproducible pseudo-random numbers.
//!
//! Every random quantity in the crate is drawn from [`XorShift64Star`]. The
//! algorithm is fixed so that streams can be regenerated by any other
//! implementation from the same seed:
//!
//! ```text
//! seeding   state = splitmix64(seed); if state == 0 { state = 0x9E37_79B9_7F4A_7C15 }
//! step      x = state
//!           x ^= x >> 12
//!           x ^= x << 25
//!           x ^= x >> 27
//!           state = x
//!           out = x * 0x2545_F491_4F6C_DD1D        (wrapping u64 multiply)
//! f64       (out >> 11) * 2^-53                    in [0, 1)
//! gaussian  u1 = 1 - f64(), u2 = f64()
//!           sqrt(-2 ln u1) * cos(2 pi u2)          (one draw per call, no caching)
//! ```
//!
//! `splitmix64(z)`: `z += 0x9E37_79B9_7F4A_7C15; z = (z ^ (z >> 30)) * 0xBF58_476D_1CE4_E5B9;
//! z = (z ^ (z >> 27)) * 0x94D0_49BB_1331_11EB; z ^ (z >> 31)` (all wrapping).
//!
//! Independent sub-streams are derived with [`derive_seed`], which mixes a
//! stream tag into the seed through one more splitmix64 round.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for a named sub-stream of `seed`.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    pub fn new(seed: u64) -> Self {
        let state = match splitmix64(seed) {
            0 => GOLDEN,
            s => s,
        };
        Self { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        // Multiply-shift; bias is < 2^-64 * n and irrelevant at our sizes.
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        if std == 0.0 {
            return mean;
        }
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        mean + std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn bool(&mut self, p_true: f64) -> bool {
        self.next_f64() < p_true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = XorShift64Star::new(42);
        let mut b = XorShift64Star::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn zero_seed_is_usable() {
        let mut r = XorShift64Star::new(0);
        let first = r.next_u64();
        assert_ne!(first, 0);
        assert_ne!(first, r.next_u64());
    }

    #[test]
    fn known_first_outputs() {
        // Frozen reference values; a change here means streams changed.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        let mut r = XorShift64Star::new(1);
        let v: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        let mut again = XorShift64Star::new(1);
        assert_eq!(v, (0..3).map(|_| again.next_u64()).collect::<Vec<_>>());
    }

    #[test]
    fn unit_interval_and_moments() {
        let mut r = XorShift64Star::new(7);
        let n = 100_000;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let x = r.next_f64();
            assert!((0.0..1.0).contains(&x));
            let g = r.gaussian(0.0, 1.0);
            sum += g;
            sq += g * g;
        }
        let mean = sum / n as f64;
        let var = sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.03, "var {var}");
    }

    #[test]
    fn derived_streams_differ() {
        assert_ne!(derive_seed(5, 1), derive_seed(5, 2));
        assert_ne!(derive_seed(5, 1), derive_seed(6, 1));
    }
}
