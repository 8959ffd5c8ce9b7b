use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};
use serde::{Deserialize, Serialize};

use super::{Observation, RegressionStream};
use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// A law on the nonnegative integers, used for offspring and immigration counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum CountLaw {
    Poisson { mean: f64 },
    Bernoulli { p: f64 },
    /// Number of failures before the first success, parameterized by its mean.
    Geometric { mean: f64 },
    /// Always `value`. Meant for degenerate test streams.
    Deterministic { value: u64 },
}

impl CountLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CountLaw::Poisson { mean } => mean >= 0.0 && mean.is_finite(),
            CountLaw::Bernoulli { p } => (0.0..=1.0).contains(&p),
            CountLaw::Geometric { mean } => mean >= 0.0 && mean.is_finite(),
            CountLaw::Deterministic { .. } => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid count law {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CountLaw::Poisson { mean } | CountLaw::Geometric { mean } => mean,
            CountLaw::Bernoulli { p } => p,
            CountLaw::Deterministic { value } => value as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            CountLaw::Poisson { mean } => mean,
            CountLaw::Bernoulli { p } => p * (1.0 - p),
            CountLaw::Geometric { mean } => mean * (1.0 + mean),
            CountLaw::Deterministic { .. } => 0.0,
        }
    }

    /// `E[(Y − E Y)⁴]`.
    pub fn fourth_central_moment(&self) -> f64 {
        match *self {
            CountLaw::Poisson { mean } => mean + 3.0 * mean * mean,
            CountLaw::Bernoulli { p } => p * (1.0 - p) * (1.0 - 3.0 * p + 3.0 * p * p),
            CountLaw::Geometric { mean } => {
                let p = 1.0 / (1.0 + mean);
                (1.0 - p) * (9.0 - 9.0 * p + p * p) / p.powi(4)
            }
            CountLaw::Deterministic { .. } => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match *self {
            CountLaw::Poisson { mean } => {
                if mean > 0.0 {
                    Poisson::new(mean).expect("validated mean").sample(rng) as u64
                } else {
                    0
                }
            }
            CountLaw::Bernoulli { p } => rng.random_bool(p) as u64,
            CountLaw::Geometric { mean } => {
                Geometric::new(1.0 / (1.0 + mean)).expect("validated mean").sample(rng)
            }
            CountLaw::Deterministic { value } => value,
        }
    }

    /// Sum of `count` independent draws. Poisson and Bernoulli sums are drawn
    /// exactly as a single Poisson or binomial variate; geometric sums are
    /// drawn one by one and abort once `count` exceeds `cap`.
    pub fn sample_sum<R: Rng + ?Sized>(&self, count: u64, cap: u64, rng: &mut R) -> Result<u64> {
        if count == 0 {
            return Ok(0);
        }
        Ok(match *self {
            CountLaw::Poisson { mean } => CountLaw::Poisson { mean: mean * count as f64 }.sample(rng),
            CountLaw::Bernoulli { p } => Binomial::new(count, p).expect("validated p").sample(rng),
            CountLaw::Deterministic { value } => value * count,
            CountLaw::Geometric { .. } => {
                if count > cap {
                    return Err(Error::DrawCapExceeded { cap, population: count });
                }
                (0..count).map(|_| self.sample(rng)).sum()
            }
        })
    }
}

fn default_draw_cap() -> u64 {
    1 << 24
}

/// `X_{n+1} = Σ_{k ≤ X_n} Y_{n,k} + I_{n+1}` with `X_0 = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchingSpec {
    pub offspring: CountLaw,
    pub immigration: CountLaw,
    #[serde(default = "default_draw_cap")]
    pub draw_cap: u64,
}

impl BranchingSpec {
    pub fn poisson(m: f64, lambda: f64) -> Result<Self> {
        let spec = Self {
            offspring: CountLaw::Poisson { mean: m },
            immigration: CountLaw::Poisson { mean: lambda },
            draw_cap: default_draw_cap(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.offspring.validate()?;
        self.immigration.validate()?;
        let m = self.m();
        if !(0.0..1.0).contains(&m) {
            return Err(Error::InvalidConfig(format!("offspring mean must lie in [0, 1), got {m}")));
        }
        if !(self.lambda() > 0.0) {
            return Err(Error::InvalidConfig("immigration mean must be positive".into()));
        }
        Ok(())
    }

    pub fn m(&self) -> f64 {
        self.offspring.mean()
    }

    pub fn lambda(&self) -> f64 {
        self.immigration.mean()
    }

    /// `θ = (m, λ)`.
    pub fn theta(&self) -> [f64; 2] {
        [self.m(), self.lambda()]
    }

    /// `σ²`, the offspring variance.
    pub fn sigma2(&self) -> f64 {
        self.offspring.variance()
    }

    /// `b²`, the immigration variance.
    pub fn b2(&self) -> f64 {
        self.immigration.variance()
    }

    pub fn tau4(&self) -> f64 {
        self.offspring.fourth_central_moment()
    }

    pub fn nu4(&self) -> f64 {
        self.immigration.fourth_central_moment()
    }

    /// `η = (σ², b²)`.
    pub fn eta(&self) -> [f64; 2] {
        [self.sigma2(), self.b2()]
    }

    pub fn stationary_mean(&self) -> f64 {
        self.lambda() / (1.0 - self.m())
    }
}

/// One transition `X_n → X_{n+1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingStep {
    pub n: u64,
    pub x: u64,
    pub x_next: u64,
    pub immigrants: u64,
}

#[derive(Clone, Debug)]
pub struct BranchingSimulator {
    spec: BranchingSpec,
    rng: ChaCha8Rng,
    x: u64,
    n: u64,
}

impl BranchingSimulator {
    pub fn new(spec: BranchingSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, rng: ChaCha8Rng::seed_from_u64(seed), x: 1, n: 0 })
    }

    pub fn spec(&self) -> &BranchingSpec {
        &self.spec
    }

    pub fn state(&self) -> u64 {
        self.x
    }

    pub fn step(&mut self) -> Result<BranchingStep> {
        let offspring = self.spec.offspring.sample_sum(self.x, self.spec.draw_cap, &mut self.rng)?;
        let immigrants = self.spec.immigration.sample(&mut self.rng);
        let x_next = offspring
            .checked_add(immigrants)
            .ok_or(Error::NonFinite("population size"))?;
        let out = BranchingStep { n: self.n, x: self.x, x_next, immigrants };
        self.x = x_next;
        self.n += 1;
        Ok(out)
    }
}

impl Iterator for BranchingSimulator {
    type Item = Result<BranchingStep>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(self.step())
    }
}

/// A branching step rewritten as `Z_{n+1} = θᵀΨ_n + ξ_{n+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedStep {
    /// `c_n = X_n + 1`.
    pub c: f64,
    /// `Φ_n = (X_n, 1)`.
    pub phi: [f64; 2],
    /// `Ψ_n = c_n^{−1/2} Φ_n`.
    pub psi: [f64; 2],
    pub z: f64,
    pub xi: f64,
    pub alpha: f64,
}

pub fn normalize_branching(step: &BranchingStep, spec: &BranchingSpec) -> NormalizedStep {
    let x = step.x as f64;
    let x_next = step.x_next as f64;
    let c = x + 1.0;
    let r = c.sqrt().recip();
    NormalizedStep {
        c,
        phi: [x, 1.0],
        psi: [r * x, r],
        z: r * x_next,
        xi: r * (x_next - spec.m() * x - spec.lambda()),
        alpha: step.n as f64,
    }
}

/// The normalized branching chain as a regression stream in `(Ψ, Z, ξ)`.
#[derive(Clone, Debug)]
pub struct BranchingStream {
    sim: BranchingSimulator,
    theta: [f64; 2],
}

impl BranchingStream {
    pub fn new(spec: BranchingSpec, seed: u64) -> Result<Self> {
        Ok(Self { sim: BranchingSimulator::new(spec, seed)?, theta: spec.theta() })
    }
}

impl RegressionStream for BranchingStream {
    fn dim(&self) -> usize {
        2
    }

    fn theta(&self) -> Option<&[f64]> {
        Some(&self.theta)
    }

    fn next_into(&mut self, phi: &mut [f64]) -> Result<Observation> {
        let raw = self.sim.step()?;
        let s = normalize_branching(&raw, self.sim.spec());
        phi.copy_from_slice(&s.psi);
        Ok(Observation { n: raw.n, x_next: s.z, eps: s.xi, alpha: s.alpha })
    }
}

/// Monte Carlo estimates of the two stationary limiting matrices with
/// per-entry batch-means standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryEstimates {
    /// `E[(X², X; X, 1) / (X + 1)]`
    pub l_hat: SymMatrix,
    pub l_se: SymMatrix,
    /// `E[(X², X; X, 1) / (X + 1)²]`
    pub lambda_hat: SymMatrix,
    pub lambda_se: SymMatrix,
    pub samples: u64,
}

const STATIONARY_BATCHES: u64 = 50;

pub fn stationary_matrix_estimates(
    spec: &BranchingSpec,
    burn_in: u64,
    samples: u64,
    seed: u64,
) -> Result<StationaryEstimates> {
    if samples < STATIONARY_BATCHES * 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least {} samples",
            STATIONARY_BATCHES * 2
        )));
    }
    let mut sim = BranchingSimulator::new(*spec, seed)?;
    for _ in 0..burn_in {
        sim.step()?;
    }
    let batch_len = samples / STATIONARY_BATCHES;
    let used = batch_len * STATIONARY_BATCHES;
    // entries: x²/c, x/c, 1/c, x²/c², x/c², 1/c²
    let mut batch_means = vec![[0.0f64; 6]; STATIONARY_BATCHES as usize];
    for batch in batch_means.iter_mut() {
        let mut acc = [0.0f64; 6];
        for _ in 0..batch_len {
            let x = sim.step()?.x_next as f64;
            let c = x + 1.0;
            let vals = [x * x / c, x / c, 1.0 / c, x * x / (c * c), x / (c * c), 1.0 / (c * c)];
            for (a, v) in acc.iter_mut().zip(vals) {
                *a += v;
            }
        }
        for (b, a) in batch.iter_mut().zip(acc) {
            *b = a / batch_len as f64;
        }
    }
    let k = STATIONARY_BATCHES as f64;
    let mut mean = [0.0f64; 6];
    let mut se = [0.0f64; 6];
    for e in 0..6 {
        mean[e] = batch_means.iter().map(|b| b[e]).sum::<f64>() / k;
        let var = batch_means.iter().map(|b| (b[e] - mean[e]).powi(2)).sum::<f64>() / (k - 1.0);
        se[e] = (var / k).sqrt();
    }
    let mat = |v: &[f64]| SymMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 0) => v[0],
        (1, 1) => v[2],
        _ => v[1],
    });
    Ok(StationaryEstimates {
        l_hat: mat(&mean[..3]),
        l_se: mat(&se[..3]),
        lambda_hat: mat(&mean[3..]),
        lambda_se: mat(&se[3..]),
        samples: used,
    })
}

/// `E[V²_{n+1} | X_n = x]` for `V_{n+1} = ε²_{n+1} − σ²x − b²`:
/// `2σ⁴x² + x(τ⁴ − 3σ⁴ + 4b²σ²) + ν⁴ − b⁴`.
pub fn conditional_variance_v(spec: &BranchingSpec, x: u64) -> f64 {
    let x = x as f64;
    let s2 = spec.sigma2();
    let b2 = spec.b2();
    2.0 * s2 * s2 * x * x + x * (spec.tau4() - 3.0 * s2 * s2 + 4.0 * b2 * s2) + spec.nu4() - b2 * b2
}
