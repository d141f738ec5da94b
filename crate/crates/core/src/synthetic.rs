//! Seeded two-dimensional regression data: inputs drawn from a Gaussian with
//! a random covariance `AAᵀ`, targets a noisy saddle-shaped quadratic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::Dataset;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticConfig {
    pub samples: usize,
    /// Coefficients of `x₁²`, `x₂²` and `x₁x₂`.
    pub coefficients: [f64; 3],
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for QuadraticConfig {
    fn default() -> Self {
        QuadraticConfig {
            samples: 128,
            coefficients: [0.02, -0.02, 0.0],
            noise_std: 0.002,
            seed: 2019,
        }
    }
}

impl QuadraticConfig {
    pub fn target(&self, x: &[f64]) -> f64 {
        let [a, b, c] = self.coefficients;
        a * x[0] * x[0] + b * x[1] * x[1] + c * x[0] * x[1]
    }
}

/// Draw the dataset described by `cfg`; identical seeds give identical data.
pub fn quadratic_dataset(cfg: &QuadraticConfig) -> Result<Dataset> {
    if cfg.samples == 0 {
        return Err(Error::input("need at least one sample"));
    }
    if !(cfg.noise_std >= 0.0 && cfg.noise_std.is_finite()) {
        return Err(Error::input("noise_std must be finite and >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let a = [[normal(), normal()], [normal(), normal()]];
    let mut inputs = Vec::with_capacity(cfg.samples);
    let mut targets = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let (u, v) = (normal(), normal());
        let x = vec![a[0][0] * u + a[0][1] * v, a[1][0] * u + a[1][1] * v];
        targets.push(cfg.target(&x) + cfg.noise_std * normal());
        inputs.push(x);
    }
    Dataset::scalar(inputs, targets)
}
