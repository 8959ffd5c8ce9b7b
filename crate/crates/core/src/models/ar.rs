use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{NoiseSpec, Observation, RegressionStep, RegressionStream};
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, MAX_DIM};

/// `X_{n+1} = θ₁X_n + … + θ_d X_{n−d+1} + ε_{n+1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArSpec {
    pub theta: Vec<f64>,
    pub noise: NoiseSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArAnalysis {
    /// Companion matrix, row-major: `θ` in the first row, ones on the subdiagonal.
    pub companion: Vec<Vec<f64>>,
    pub rho: f64,
}

impl ArSpec {
    pub fn new(theta: Vec<f64>, noise: NoiseSpec) -> Result<Self> {
        let spec = Self { theta, noise };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        analyze_ar(self).map(|_| ())
    }
}

fn companion(theta: &[f64]) -> Vec<Vec<f64>> {
    let d = theta.len();
    let mut c = vec![vec![0.0; d]; d];
    c[0].copy_from_slice(theta);
    for i in 1..d {
        c[i][i - 1] = 1.0;
    }
    c
}

/// Largest root modulus of `z^d − θ₁z^{d−1} − … − θ_d`, the characteristic
/// polynomial of the companion matrix, by Durand–Kerner iteration.
fn spectral_radius(theta: &[f64]) -> f64 {
    let d = theta.len();
    if d == 1 {
        return theta[0].abs();
    }
    // monic coefficients, highest degree first
    let coeffs: Vec<f64> = std::iter::once(1.0).chain(theta.iter().map(|t| -t)).collect();
    let eval = |z: Complex64| coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let bound = 1.0 + theta.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32) * bound).collect();
    for _ in 0..10_000 {
        let mut change = 0.0f64;
        for i in 0..d {
            let zi = roots[i];
            let denom = (0..d)
                .filter(|&j| j != i)
                .fold(Complex64::new(1.0, 0.0), |acc, j| acc * (zi - roots[j]));
            if denom.norm() == 0.0 {
                roots[i] += Complex64::new(1e-9, 1e-9);
                change = f64::INFINITY;
                continue;
            }
            let delta = eval(zi) / denom;
            roots[i] = zi - delta;
            change = change.max(delta.norm());
        }
        if change < 1e-15 {
            break;
        }
    }
    roots.iter().fold(0.0, |m, r| m.max(r.norm()))
}

/// Builds the companion matrix and rejects unstable models.
pub fn analyze_ar(spec: &ArSpec) -> Result<ArAnalysis> {
    let d = spec.theta.len();
    if d == 0 || d > MAX_DIM {
        return Err(Error::UnsupportedDimension(d));
    }
    if spec.theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("autoregressive coefficients"));
    }
    let rho = spectral_radius(&spec.theta);
    if !(rho < 1.0) {
        return Err(Error::Unstable { rho });
    }
    Ok(ArAnalysis { companion: companion(&spec.theta), rho })
}

const LYAPUNOV_TOL: f64 = 1e-12;
const LYAPUNOV_MAX_ITER: usize = 1_000_000;

/// `L = Σ_k C^k Γ (Cᵀ)^k` with `Γ = σ² e₁e₁ᵀ`, by iterating `L ← C L Cᵀ + Γ`.
pub fn limiting_matrix_ar(spec: &ArSpec) -> Result<SymMatrix> {
    let c = analyze_ar(spec)?.companion;
    let d = c.len();
    let mut l = vec![vec![0.0; d]; d];
    l[0][0] = spec.noise.sigma2;
    let mut cl = vec![vec![0.0; d]; d];
    for _ in 0..LYAPUNOV_MAX_ITER {
        for i in 0..d {
            for j in 0..d {
                cl[i][j] = (0..d).map(|k| c[i][k] * l[k][j]).sum();
            }
        }
        let mut change = 0.0f64;
        let mut next = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut v: f64 = (0..d).map(|k| cl[i][k] * c[j][k]).sum();
                if i == 0 && j == 0 {
                    v += spec.noise.sigma2;
                }
                change = change.max((v - l[i][j]).abs());
                next[i][j] = v;
            }
        }
        l = next;
        if change <= LYAPUNOV_TOL {
            let out = SymMatrix::from_fn(d, |i, j| 0.5 * (l[i][j] + l[j][i]));
            out.cholesky()?;
            return Ok(out);
        }
    }
    Err(Error::NoConvergence { iterations: LYAPUNOV_MAX_ITER })
}

/// Simulates a stable autoregression from the zero state.
#[derive(Clone, Debug)]
pub struct ArSimulator {
    spec: ArSpec,
    rng: ChaCha8Rng,
    /// `(X_n, …, X_{n−d+1})`
    state: Vec<f64>,
    n: u64,
}

impl ArSimulator {
    pub fn new(spec: ArSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self::with_rng(spec, ChaCha8Rng::seed_from_u64(seed)))
    }

    pub(crate) fn with_rng(spec: ArSpec, rng: ChaCha8Rng) -> Self {
        let d = spec.dim();
        Self { spec, rng, state: vec![0.0; d], n: 0 }
    }

    pub fn spec(&self) -> &ArSpec {
        &self.spec
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }
}

impl RegressionStream for ArSimulator {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn theta(&self) -> Option<&[f64]> {
        Some(&self.spec.theta)
    }

    #[inline]
    fn next_into(&mut self, phi: &mut [f64]) -> Result<Observation> {
        phi.copy_from_slice(&self.state);
        let eps = self.spec.noise.draw(&mut self.rng);
        let x_next = crate::linalg::dot(&self.spec.theta, &self.state) + eps;
        if !x_next.is_finite() {
            return Err(Error::NonFinite("autoregressive state"));
        }
        self.state.rotate_right(1);
        self.state[0] = x_next;
        let obs = Observation { n: self.n, x_next, eps, alpha: self.n as f64 };
        self.n += 1;
        Ok(obs)
    }
}

impl Iterator for ArSimulator {
    type Item = RegressionStep;

    fn next(&mut self) -> Option<RegressionStep> {
        super::next_step(self).ok()
    }
}
