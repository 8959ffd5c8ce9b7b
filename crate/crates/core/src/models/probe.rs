use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{NoiseSpec, Observation, RegressionStream};
use crate::error::Result;

/// `Φ_n = (1, W_n)` with `W` a Rademacher random walk from 0, and
/// `X_{n+1} = ε_{n+1}` (so `θ = 0`).
///
/// The eigenvalues of `S_n` grow like `n` and `n²`, so the design does not
/// normalize to a fixed positive definite limit.
#[derive(Clone, Debug)]
pub struct RandomWalkProbe {
    noise: NoiseSpec,
    rng: ChaCha8Rng,
    w: f64,
    n: u64,
    theta: [f64; 2],
}

impl RandomWalkProbe {
    pub fn new(noise: NoiseSpec, seed: u64) -> Result<Self> {
        noise.validate()?;
        Ok(Self { noise, rng: ChaCha8Rng::seed_from_u64(seed), w: 0.0, n: 0, theta: [0.0; 2] })
    }

    pub fn walk(&self) -> f64 {
        self.w
    }
}

impl RegressionStream for RandomWalkProbe {
    fn dim(&self) -> usize {
        2
    }

    fn theta(&self) -> Option<&[f64]> {
        Some(&self.theta)
    }

    fn next_into(&mut self, phi: &mut [f64]) -> Result<Observation> {
        phi[0] = 1.0;
        phi[1] = self.w;
        let eps = self.noise.draw(&mut self.rng);
        self.w += if self.rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let obs = Observation { n: self.n, x_next: eps, eps, alpha: self.n as f64 };
        self.n += 1;
        Ok(obs)
    }
}
