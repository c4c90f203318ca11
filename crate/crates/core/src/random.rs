//! Seeded random streams. Each consumer picks a stream index so results do
//! not depend on scheduling.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard normal deviates by Box–Muller, consumed in (cos, sin) pairs.
pub fn gaussian_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    let mut out = DVector::zeros(len);
    let mut i = 0;
    while i < len {
        let u1 = 1.0 - rng.random::<f64>();
        let u2 = rng.random::<f64>();
        let rad = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        out[i] = rad * c;
        if i + 1 < len {
            out[i + 1] = rad * s;
        }
        i += 2;
    }
    out
}

/// Uniform deviates in the open interval (−1, 1).
pub fn uniform_symmetric(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| loop {
        let v = rng.random::<f64>() * 2.0 - 1.0;
        if v != -1.0 {
            break v;
        }
    })
}

/// Random ±1 entries.
pub fn signs(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = gaussian_vector(&mut stream(42, 0), 7);
        let b = gaussian_vector(&mut stream(42, 0), 7);
        let c = gaussian_vector(&mut stream(42, 1), 7);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_moments() {
        let g = gaussian_vector(&mut stream(1, 0), 20_000);
        let mean = g.mean();
        let var = g.map(|v| (v - mean).powi(2)).mean();
        assert!(mean.abs() < 0.03);
        assert!((var - 1.0).abs() < 0.05);
    }

    #[test]
    fn uniform_range() {
        let u = uniform_symmetric(&mut stream(3, 0), 1000);
        assert!(u.iter().all(|v| *v > -1.0 && *v < 1.0));
    }
}
