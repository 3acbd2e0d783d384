//! Seeded randomness.
//!
//! All generators are ChaCha8 streams seeded from a `u64`. Gaussian variates
//! use the Box–Muller transform: with `u1` uniform on (0, 1] and `u2` uniform
//! on [0, 1), `sqrt(-2 ln u1) * cos(2 pi u2)` and `sqrt(-2 ln u1) * sin(2 pi u2)`
//! are two independent standard normals, emitted in that order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Real, Tensor};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal variates by Box–Muller.
pub struct GaussianSampler<'a, R: Rng> {
    rng: &'a mut R,
    spare: Option<f64>,
}

impl<'a, R: Rng> GaussianSampler<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        Self { rng, spare: None }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// I.i.d. `N(0, std^2)` entries.
pub fn gaussian_tensor<T: Real, R: Rng>(shape: &[usize], std: f64, rng: &mut R) -> Tensor<T> {
    let mut sampler = GaussianSampler::new(rng);
    Tensor::from_fn(shape, |_| T::of(std * sampler.next_standard()))
}

/// He initialization: zero-mean Gaussian with standard deviation `sqrt(2 / fan_in)`.
///
/// # Panics
/// If `fan_in` is zero.
pub fn he_init<T: Real, R: Rng>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    assert!(fan_in >= 1, "fan_in must be at least 1");
    gaussian_tensor(shape, (2.0 / fan_in as f64).sqrt(), rng)
}

/// Entries uniform on [-1, 1); handy for tests and probes.
pub fn uniform_tensor<T: Real>(shape: &[usize], rng: &mut impl Rng) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::of(rng.gen_range(-1.0..1.0)))
}
