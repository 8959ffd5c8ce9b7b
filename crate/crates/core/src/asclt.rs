//! Log-averaged moment statistics and their closed-form limits.
//!
//! For a transform driven by noise of conditional variance `σ²`:
//!
//! ```text
//!   (1 / log d_n) Σ f_k V_k^p           →  ℓ(p) = d σ^{2p} Π_{j=1}^{p-1} (d + 2j)
//!   (1 / log d_n) Σ (V_k^p − h_k^p)     →  λ(p) = (p / d) ℓ(p)
//!   (1 / log d_n) Σ a_k(1)^p            →  σ² if p = 1, 0 if p > 1
//! ```
//!
//! and in dimension one `ℓ(p)` is the Gaussian moment `σ^{2p} (2p)! / (2^p p!)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::martingale::StepRecord;

/// `ℓ(p) = d σ^{2p} Π_{j=1}^{p-1} (d + 2j)`.
pub fn target_ell(p: u32, d: usize, sigma2: f64) -> f64 {
    let product: u128 = (1..p as u128).map(|j| d as u128 + 2 * j).product();
    (d as u128 * product) as f64 * sigma2.powi(p as i32)
}

/// `λ(p) = (p / d) ℓ(p)`.
pub fn target_lambda(p: u32, d: usize, sigma2: f64) -> f64 {
    p as f64 / d as f64 * target_ell(p, d, sigma2)
}

/// `E[N(0, σ²)^{2p}] = σ^{2p} (2p − 1)!!`.
pub fn gaussian_even_moment(p: u32, sigma2: f64) -> f64 {
    let double_factorial: u128 = (1..=p as u128).map(|j| 2 * j - 1).product();
    double_factorial as f64 * sigma2.powi(p as i32)
}

/// Running log-averaged sums for one moment order `p`.
///
/// Normalizers are net of the prior: `log d_n − log det S0` for the vector
/// statistics and `log s_n − log s_{-1}` for the scalar one. Merging adds
/// both sums and normalizers, so a merged report is the normalizer-weighted
/// mean of the individual reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    p: u32,
    d: usize,
    sigma2: f64,
    log_det_prior: f64,
    /// Σ f_k V_k^p
    sum_fv: f64,
    /// Σ (V_k^p − h_k^p)
    sum_ap: f64,
    /// Σ a_k(1)^p
    sum_a1p: f64,
    /// Σ f_k (M_k² / s_{k-1})^p from the independent scalar route.
    sum_scalar: f64,
    /// Latest `log d_n`.
    log_det: f64,
    norm: f64,
    scalar_norm: f64,
    k_count: u64,
    replicas: u32,
}

/// Normalized statistics of a [`MomentAccumulator`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub p: u32,
    pub d: usize,
    pub steps: u64,
    /// Normalizer used, `log d_n − log det S0` (summed over merged runs).
    pub log_det: f64,
    pub avg_fv: f64,
    pub target_ell: f64,
    pub rel_err_ell: f64,
    pub avg_ap: f64,
    pub target_lambda: f64,
    pub rel_err_lambda: f64,
    /// `(1 / log d_n) Σ a_k(1)^p`; tends to `σ²` for `p = 1` and to 0 otherwise.
    pub avg_a1_pow: f64,
    pub a1_pow_target: f64,
    /// Scalar statistic; present only when fed via [`MomentAccumulator::accumulate_scalar`].
    pub avg_scalar: Option<f64>,
    pub gaussian_moment: f64,
}

impl MomentAccumulator {
    pub fn new(p: u32, d: usize, sigma2: f64, log_det_prior: f64) -> Result<Self> {
        if p == 0 || d == 0 {
            return Err(Error::InvalidArgument("moment order and dimension must be positive".into()));
        }
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument("σ² must be positive".into()));
        }
        Ok(Self {
            p,
            d,
            sigma2,
            log_det_prior,
            sum_fv: 0.0,
            sum_ap: 0.0,
            sum_a1p: 0.0,
            sum_scalar: 0.0,
            log_det: log_det_prior,
            norm: 0.0,
            scalar_norm: 0.0,
            k_count: 0,
            replicas: 1,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn sum_fv(&self) -> f64 {
        self.sum_fv
    }

    pub fn sum_ap(&self) -> f64 {
        self.sum_ap
    }

    pub fn sum_a1p(&self) -> f64 {
        self.sum_a1p
    }

    pub fn sum_scalar(&self) -> f64 {
        self.sum_scalar
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn k_count(&self) -> u64 {
        self.k_count
    }

    pub fn normalizer(&self) -> f64 {
        self.norm
    }

    #[inline]
    pub fn accumulate(&mut self, rec: &StepRecord) {
        let p = self.p as i32;
        let vp = rec.v.powi(p);
        self.sum_fv += rec.f * vp;
        self.sum_ap += vp - rec.h.powi(p);
        self.sum_a1p += rec.a1.powi(p);
        self.log_det = rec.log_det;
        self.norm = rec.log_det - self.log_det_prior;
        self.k_count += 1;
    }

    #[inline]
    pub fn accumulate_scalar(&mut self, step: &ScalarStep) {
        self.sum_scalar += step.f * step.ratio.powi(self.p as i32);
        self.scalar_norm = step.log_s_net;
    }

    pub fn report(&self) -> Result<MomentReport> {
        if !(self.norm > 0.0) {
            return Err(Error::InsufficientData);
        }
        let target_ell = target_ell(self.p, self.d, self.sigma2);
        let target_lambda = target_lambda(self.p, self.d, self.sigma2);
        let avg_fv = self.sum_fv / self.norm;
        let avg_ap = self.sum_ap / self.norm;
        Ok(MomentReport {
            p: self.p,
            d: self.d,
            steps: self.k_count,
            log_det: self.norm,
            avg_fv,
            target_ell,
            rel_err_ell: (avg_fv - target_ell).abs() / target_ell,
            avg_ap,
            target_lambda,
            rel_err_lambda: (avg_ap - target_lambda).abs() / target_lambda,
            avg_a1_pow: self.sum_a1p / self.norm,
            a1_pow_target: if self.p == 1 { self.sigma2 } else { 0.0 },
            avg_scalar: (self.scalar_norm > 0.0).then(|| self.sum_scalar / self.scalar_norm),
            gaussian_moment: gaussian_even_moment(self.p, self.sigma2),
        })
    }

    /// An accumulator with nothing consumed; the identity for [`Self::merge`].
    pub fn empty_like(&self) -> Self {
        let mut e = Self::new(self.p, self.d, self.sigma2, 0.0).expect("validated configuration");
        e.replicas = 0;
        e
    }

    /// Pools two accumulators of the same `(p, d, σ²)` configuration.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.p != other.p || self.d != other.d || self.sigma2 != other.sigma2 {
            return Err(Error::ConfigMismatch(format!(
                "cannot merge (p={}, d={}, σ²={}) with (p={}, d={}, σ²={})",
                self.p, self.d, self.sigma2, other.p, other.d, other.sigma2
            )));
        }
        Ok(Self {
            p: self.p,
            d: self.d,
            sigma2: self.sigma2,
            log_det_prior: 0.0,
            sum_fv: self.sum_fv + other.sum_fv,
            sum_ap: self.sum_ap + other.sum_ap,
            sum_a1p: self.sum_a1p + other.sum_a1p,
            sum_scalar: self.sum_scalar + other.sum_scalar,
            log_det: self.norm + other.norm,
            norm: self.norm + other.norm,
            scalar_norm: self.scalar_norm + other.scalar_norm,
            k_count: self.k_count + other.k_count,
            replicas: self.replicas + other.replicas,
        })
    }
}

/// The scalar transform `M_n = M_0 + Σ Φ_{k-1} ε_k` with `s_n = s_{-1} + Σ Φ_k²`,
/// tracked without any matrix machinery.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalarTrack {
    m: f64,
    s: f64,
    log_s_prior: f64,
}

/// One step of a [`ScalarTrack`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarStep {
    /// `f_k = Φ_k² / s_k`.
    pub f: f64,
    /// `M_k² / s_{k-1}`.
    pub ratio: f64,
    /// `M_k / √s_{k-1}`.
    pub point: f64,
    /// `log s_k − log s_{-1}`.
    pub log_s_net: f64,
}

impl ScalarTrack {
    pub fn new(m0: f64, s_prior: f64) -> Result<Self> {
        if !(s_prior > 0.0) {
            return Err(Error::InvalidArgument("scalar prior must be positive".into()));
        }
        Ok(Self { m: m0, s: s_prior, log_s_prior: s_prior.ln() })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    #[inline]
    pub fn step(&mut self, phi: f64, eps: f64) -> ScalarStep {
        let s_prev = self.s;
        self.s += phi * phi;
        let out = ScalarStep {
            f: phi * phi / self.s,
            ratio: self.m * self.m / s_prev,
            point: self.m / s_prev.sqrt(),
            log_s_net: self.s.ln() - self.log_s_prior,
        };
        self.m += phi * eps;
        out
    }
}

/// Default number of interior bins.
pub const DEFAULT_BINS: usize = 201;
/// Default half-width of the binned range, in units of σ.
pub const DEFAULT_HALF_WIDTH_SIGMAS: f64 = 6.0;

/// Weighted histogram on uniform bins over `[lo, hi)` plus two overflow bins.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedHistogram {
    lo: f64,
    hi: f64,
    weights: Vec<f64>,
    underflow: f64,
    overflow: f64,
    total_weight: f64,
}

impl WeightedHistogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(lo < hi) || bins == 0 {
            return Err(Error::InvalidArgument("histogram range must be non-empty".into()));
        }
        Ok(Self {
            lo,
            hi,
            weights: vec![0.0; bins],
            underflow: 0.0,
            overflow: 0.0,
            total_weight: 0.0,
        })
    }

    /// 201 bins on `[−6σ, 6σ]`.
    pub fn for_sigma2(sigma2: f64) -> Result<Self> {
        let half = DEFAULT_HALF_WIDTH_SIGMAS * sigma2.sqrt();
        Self::new(-half, half, DEFAULT_BINS)
    }

    pub fn bins(&self) -> usize {
        self.weights.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.weights.len() as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..=self.weights.len()).map(|i| self.lo + i as f64 * w).collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn underflow(&self) -> f64 {
        self.underflow
    }

    pub fn overflow(&self) -> f64 {
        self.overflow
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    #[inline]
    pub fn add(&mut self, x: f64, weight: f64) {
        if !(weight > 0.0) || x.is_nan() {
            return;
        }
        self.total_weight += weight;
        if x < self.lo {
            self.underflow += weight;
        } else if x >= self.hi {
            self.overflow += weight;
        } else {
            let last = self.weights.len() - 1;
            let idx = ((x - self.lo) / self.bin_width()) as usize;
            self.weights[idx.min(last)] += weight;
        }
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.lo != other.lo || self.hi != other.hi || self.weights.len() != other.weights.len() {
            return Err(Error::ConfigMismatch("histogram binning differs".into()));
        }
        Ok(Self {
            lo: self.lo,
            hi: self.hi,
            weights: self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect(),
            underflow: self.underflow + other.underflow,
            overflow: self.overflow + other.overflow,
            total_weight: self.total_weight + other.total_weight,
        })
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Kolmogorov distance between the weighted empirical measure and `N(0, σ²)`.
///
/// The mass of each interior bin is placed at the bin center; underflow and
/// overflow mass sit at `∓∞`. The supremum of `|F_emp − Φ|` over the real
/// line is then attained at the left or right limit of one of the atoms.
pub fn weighted_ks(hist: &WeightedHistogram, sigma2: f64) -> Result<f64> {
    if !(hist.total_weight > 0.0) {
        return Err(Error::InsufficientData);
    }
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidArgument("σ² must be positive".into()));
    }
    let sigma = sigma2.sqrt();
    let total = hist.total_weight;
    let width = hist.bin_width();
    let mut cum = hist.underflow / total;
    let mut worst = cum;
    for (i, w) in hist.weights.iter().enumerate() {
        let center = hist.lo + (i as f64 + 0.5) * width;
        let g = normal_cdf(center / sigma);
        worst = worst.max((cum - g).abs());
        cum += w / total;
        worst = worst.max((cum - g).abs());
    }
    worst = worst.max(hist.overflow / total);
    Ok(worst.clamp(0.0, 1.0))
}
