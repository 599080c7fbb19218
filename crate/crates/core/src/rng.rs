//! Reproducible randomness.
//!
//! Every protocol round draws from its own ChaCha8 stream keyed by `(seed, round)`,
//! so results do not depend on how rounds are split across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::qstate::BlochVector;

/// Independent generator for one round.
pub fn round_rng(seed: u64, round: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(round);
    rng
}

/// Uniform in `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Pair of independent standard normals by Box-Muller.
#[inline]
pub fn normal_pair<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - uniform(rng); // (0, 1]
    let u2 = uniform(rng);
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
    (r * c, r * s)
}

pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    normal_pair(rng).0
}

/// Uniform point on the unit sphere from three normalized Gaussians.
#[inline]
pub fn uniform_sphere<R: RngCore + ?Sized>(rng: &mut R) -> BlochVector {
    loop {
        let (a, b) = normal_pair(rng);
        let (c, _) = normal_pair(rng);
        let n = (a * a + b * b + c * c).sqrt();
        if n > 1e-300 {
            return BlochVector::from_unit([a / n, b / n, c / n]);
        }
    }
}

/// Index drawn by inverse CDF over `weights` (in order) using one uniform `u`.
pub fn pick_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > 0.0 {
            last_positive = i;
            acc += w;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| round_rng(1, 5).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(round_rng(1, 5).next_u64(), round_rng(1, 6).next_u64());
        assert_ne!(round_rng(1, 5).next_u64(), round_rng(2, 5).next_u64());
    }

    #[test]
    fn sphere_moments() {
        let mut rng = round_rng(11, 0);
        let n = 200_000;
        let mut m = [0.0; 3];
        let mut zz = 0.0;
        for _ in 0..n {
            let v = uniform_sphere(&mut rng).components();
            for k in 0..3 {
                m[k] += v[k];
            }
            zz += v[2] * v[2];
        }
        for k in 0..3 {
            assert!((m[k] / n as f64).abs() < 5.0 * (1.0 / 3.0 / n as f64).sqrt());
        }
        // E[z^2] = 1/3, Var[z^2] = 1/5 - 1/9
        let sd = ((0.2 - 1.0 / 9.0) / n as f64).sqrt();
        assert!((zz / n as f64 - 1.0 / 3.0).abs() < 5.0 * sd);
    }

    #[test]
    fn pick_index_inverse_cdf() {
        let w = [0.2, 0.0, 0.5, 0.3];
        assert_eq!(pick_index(&w, 0.0), 0);
        assert_eq!(pick_index(&w, 0.19), 0);
        assert_eq!(pick_index(&w, 0.2), 2);
        assert_eq!(pick_index(&w, 0.69), 2);
        assert_eq!(pick_index(&w, 0.71), 3);
        assert_eq!(pick_index(&w, 0.999_999), 3);
        assert_eq!(pick_index(&[0.5, 0.5, 0.0], 1.0 - 1e-17), 1);
    }
}
