//! Seedable random source shared by the stochastic routines.
//!
//! Everything stochastic in this crate takes a [`rand_core::RngCore`]; the
//! default generator is ChaCha8, a counter-based stream cipher with 256-bit
//! key state, so `(seed, parameters)` pins every result bit for bit.

use rand_core::{RngCore, SeedableRng};

pub use rand_chacha::ChaCha8Rng as DefaultRng;

pub fn seeded(seed: u64) -> DefaultRng {
    DefaultRng::seed_from_u64(seed)
}

/// Uniform draw on `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform index in `0..n` (Lemire's multiply-shift; bias below 2^-32 for the sizes used here).
#[inline]
pub fn index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    ((rng.next_u64() >> 32) * n as u64 >> 32) as usize
}

/// Standard normal draw (Box–Muller, one variate per call).
pub fn normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    let u1 = 1.0 - uniform(rng);
    let u2 = uniform(rng);
    libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = seeded(7);
        let mut b = seeded(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn normal_moments() {
        let mut r = seeded(1);
        let n = 200_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x = normal(&mut r);
            s1 += x;
            s2 += x * x;
        }
        assert!((s1 / n as f64).abs() < 0.01);
        assert!((s2 / n as f64 - 1.0).abs() < 0.02);
    }

    #[test]
    fn index_in_range() {
        let mut r = seeded(3);
        let mut hits = [0usize; 5];
        for _ in 0..50_000 {
            hits[index(&mut r, 5)] += 1;
        }
        assert!(hits.iter().all(|&h| (h as f64 - 10_000.0).abs() < 500.0));
    }
}
