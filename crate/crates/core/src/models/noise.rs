use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseFamily {
    Gaussian,
    /// `±σ` with equal probability.
    Rademacher,
    /// Uniform on `[−σ√3, σ√3]`.
    Uniform,
    /// `σ (E − 1)` with `E ~ Exp(1)`.
    ShiftedExponential,
    /// Identically zero. `sigma2` is kept only as the nominal variance for targets.
    Degenerate,
}

/// A martingale-difference noise law with constant conditional variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub family: NoiseFamily,
    pub sigma2: f64,
    /// Order `a > 2` of the uniformly bounded absolute moment. Every built-in
    /// family has all moments, so this only records the assumption in use.
    #[serde(default = "default_moment_order")]
    pub moment_order_a: f64,
}

fn default_moment_order() -> f64 {
    8.0
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, sigma2: f64) -> Result<Self> {
        let spec = Self { family, sigma2, moment_order_a: default_moment_order() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(sigma2: f64) -> Result<Self> {
        Self::new(NoiseFamily::Gaussian, sigma2)
    }

    pub fn degenerate() -> Self {
        Self { family: NoiseFamily::Degenerate, sigma2: 1.0, moment_order_a: default_moment_order() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return Err(Error::InvalidConfig(format!("noise variance must be positive, got {}", self.sigma2)));
        }
        if !(self.moment_order_a > 2.0) {
            return Err(Error::InvalidConfig(format!(
                "moment order a must exceed 2, got {}",
                self.moment_order_a
            )));
        }
        Ok(())
    }

    /// The variance actually realized by draws (0 for the degenerate family).
    pub fn effective_variance(&self) -> f64 {
        match self.family {
            NoiseFamily::Degenerate => 0.0,
            _ => self.sigma2,
        }
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let sigma = self.sigma2.sqrt();
        match self.family {
            NoiseFamily::Gaussian => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseFamily::Rademacher => {
                if rng.random_bool(0.5) {
                    sigma
                } else {
                    -sigma
                }
            }
            NoiseFamily::Uniform => sigma * 3f64.sqrt() * (2.0 * rng.random::<f64>() - 1.0),
            NoiseFamily::ShiftedExponential => sigma * (rng.sample::<f64, _>(Exp1) - 1.0),
            NoiseFamily::Degenerate => 0.0,
        }
    }

    /// `σ(2q) = E[ε^{2q}]`.
    pub fn even_moment(&self, q: u32) -> f64 {
        let s = self.sigma2.powi(q as i32);
        match self.family {
            NoiseFamily::Gaussian => crate::asclt::gaussian_even_moment(q, self.sigma2),
            NoiseFamily::Rademacher => s,
            NoiseFamily::Uniform => (3.0 * self.sigma2).powi(q as i32) / (2 * q + 1) as f64,
            NoiseFamily::ShiftedExponential => subfactorial(2 * q) as f64 * s,
            NoiseFamily::Degenerate => {
                if q == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// `!n`, the central moments of `Exp(1)`.
fn subfactorial(n: u32) -> u128 {
    let (mut a, mut b) = (1u128, 0u128);
    if n == 0 {
        return 1;
    }
    for k in 2..=n as u128 {
        let next = (k - 1) * (a + b);
        a = b;
        b = next;
    }
    b
}
