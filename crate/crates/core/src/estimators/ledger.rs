use serde::{Deserialize, Serialize};

use super::ls::LsStep;
use crate::asclt::target_ell;
use crate::error::{Error, Result};

/// Cumulative prediction and estimation errors of a least-squares run.
///
/// For each order `o` in the union of the `p` and `q` sets the ledger keeps
///
/// ```text
///   C(o)     = Σ residual_k^{2o}
///   D(o)     = Σ ε_{k+1}^{2o}                      (so Γ − Δ = (C − D)/n)
///   Π(o)     = Σ π_k^{2o}
///   G(o)     = Σ_{k≥1} k^{o−1} ‖θ̂_k − θ‖^{2o}
///   R(o)     = Σ_{k≥1} k^{o−1} ((θ̂_k − θ)ᵀ L (θ̂_k − θ))^o
///   W(o)     = Σ f_k ((θ̂_k − θ)ᵀ S_k (θ̂_k − θ))^o
/// ```
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorLedger {
    orders: Vec<u32>,
    /// `σ(2o)` for each order.
    noise_moments: Vec<f64>,
    d: usize,
    sigma2: f64,
    c: Vec<f64>,
    delta: Vec<f64>,
    pi: Vec<f64>,
    g: Vec<f64>,
    res5: Vec<f64>,
    cvmoy: Vec<f64>,
    theta_known: bool,
    has_limit: bool,
    // Normalizers; for a single run these are n, ln n, log d_n − log d_{-1}, n ln n.
    n: u64,
    log_n: f64,
    log_det: f64,
    n_log_n: f64,
    replicas: u32,
}

/// Normalized statistics for one order `o`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub order: u32,
    /// `C_n(o)/n = Γ_n(2o)`.
    pub c_over_n: Option<f64>,
    pub noise_moment: f64,
    /// `Δ_n(2o)`.
    pub delta: Option<f64>,
    /// `n (Γ_n(2o) − Δ_n(2o)) / log d_n`.
    pub estmom: Option<f64>,
    /// `n (Γ_n(2o) − Δ_n(2o))² / log n`.
    pub estmoment_ratio: Option<f64>,
    /// `(1 / log d_n) Σ π_k^{2o}`.
    pub pi_avg: Option<f64>,
    /// `G_n(o) / log n`.
    pub g_over_log_n: Option<f64>,
    /// `(1 / log n) Σ k^{o−1} ((θ̂_k − θ)ᵀ L (θ̂_k − θ))^o`.
    pub res5: Option<f64>,
    /// `(1 / log d_n) Σ f_k ((θ̂_k − θ)ᵀ S_k (θ̂_k − θ))^o`.
    pub cvmoy: Option<f64>,
    pub target_ell: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub n: u64,
    pub log_n: f64,
    pub log_det: f64,
    pub orders: Vec<OrderReport>,
}

impl LedgerReport {
    pub fn order(&self, o: u32) -> Option<&OrderReport> {
        self.orders.iter().find(|r| r.order == o)
    }
}

impl ErrorLedger {
    /// `noise_moment(o)` gives `σ(2o)` for the reports; `d` and `sigma2` fix `ℓ(o)`.
    pub fn new(
        orders: &[u32],
        d: usize,
        sigma2: f64,
        noise_moment: impl Fn(u32) -> f64,
    ) -> Result<Self> {
        let mut orders = orders.to_vec();
        orders.sort_unstable();
        orders.dedup();
        if orders.is_empty() || orders[0] == 0 {
            return Err(Error::InvalidArgument("orders must be positive and non-empty".into()));
        }
        let k = orders.len();
        Ok(Self {
            noise_moments: orders.iter().map(|&o| noise_moment(o)).collect(),
            orders,
            d,
            sigma2,
            c: vec![0.0; k],
            delta: vec![0.0; k],
            pi: vec![0.0; k],
            g: vec![0.0; k],
            res5: vec![0.0; k],
            cvmoy: vec![0.0; k],
            theta_known: false,
            has_limit: false,
            n: 0,
            log_n: 0.0,
            log_det: 0.0,
            n_log_n: 0.0,
            replicas: 1,
        })
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    /// Raw `C(o)`.
    pub fn c_sum(&self, o: u32) -> Option<f64> {
        self.idx(o).map(|i| self.c[i])
    }

    /// Raw `Π(o)`.
    pub fn pi_sum(&self, o: u32) -> Option<f64> {
        self.idx(o).map(|i| self.pi[i])
    }

    /// Raw `D(o)`.
    pub fn delta_sum(&self, o: u32) -> Option<f64> {
        self.idx(o).map(|i| self.delta[i])
    }

    fn idx(&self, o: u32) -> Option<usize> {
        self.orders.iter().position(|&x| x == o)
    }

    /// `log_det_net` is `log d_k − log det S0` after step `k`.
    pub fn update(&mut self, step: &LsStep, log_det_net: f64) {
        let r2 = step.residual * step.residual;
        let e2 = step.eps.map(|e| e * e);
        let p2 = step.pi().map(|p| p * p);
        let kf = step.k as f64;
        for (i, &o) in self.orders.iter().enumerate() {
            let oi = o as i32;
            self.c[i] += r2.powi(oi);
            if let Some(e2) = e2 {
                self.delta[i] += e2.powi(oi);
            }
            if let Some(p2) = p2 {
                self.pi[i] += p2.powi(oi);
            }
            if step.k >= 1 {
                let w = kf.powi(oi - 1);
                if let Some(en) = step.err_norm2 {
                    self.g[i] += w * en.powi(oi);
                }
                if let Some(l) = step.err_l_form {
                    self.res5[i] += w * l.powi(oi);
                }
            }
            if let Some(s) = step.err_s_form {
                self.cvmoy[i] += step.f * s.powi(oi);
            }
        }
        self.theta_known |= step.eps.is_some();
        self.has_limit |= step.err_l_form.is_some();
        self.n += 1;
        let nf = self.n as f64;
        self.log_n = nf.ln();
        self.n_log_n = nf * self.log_n;
        self.log_det = log_det_net;
    }

    /// Pools two ledgers as if their streams were concatenated: raw sums and
    /// normalizers add.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.orders != other.orders || self.d != other.d || self.sigma2 != other.sigma2 {
            return Err(Error::ConfigMismatch("error ledgers have different configurations".into()));
        }
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        Ok(Self {
            orders: self.orders.clone(),
            noise_moments: self.noise_moments.clone(),
            d: self.d,
            sigma2: self.sigma2,
            c: add(&self.c, &other.c),
            delta: add(&self.delta, &other.delta),
            pi: add(&self.pi, &other.pi),
            g: add(&self.g, &other.g),
            res5: add(&self.res5, &other.res5),
            cvmoy: add(&self.cvmoy, &other.cvmoy),
            theta_known: self.theta_known || other.theta_known,
            has_limit: self.has_limit || other.has_limit,
            n: self.n + other.n,
            log_n: self.log_n + other.log_n,
            log_det: self.log_det + other.log_det,
            n_log_n: self.n_log_n + other.n_log_n,
            replicas: self.replicas + other.replicas,
        })
    }

    pub fn empty_like(&self) -> Self {
        let mut e = self.clone();
        for v in [&mut e.c, &mut e.delta, &mut e.pi, &mut e.g, &mut e.res5, &mut e.cvmoy] {
            v.iter_mut().for_each(|x| *x = 0.0);
        }
        e.theta_known = false;
        e.has_limit = false;
        e.n = 0;
        e.log_n = 0.0;
        e.log_det = 0.0;
        e.n_log_n = 0.0;
        e.replicas = 0;
        e
    }

    /// Normalized statistics; entries whose normalizer is not positive, or
    /// that need the true parameter or `L` when absent, are `None`.
    pub fn report(&self) -> LedgerReport {
        let pos = |x: f64| (x > 0.0).then_some(x);
        let n = pos(self.n as f64);
        let log_n = pos(self.log_n);
        let log_det = pos(self.log_det);
        let n_log_n = pos(self.n_log_n);
        let known = self.theta_known;
        let orders = self
            .orders
            .iter()
            .enumerate()
            .map(|(i, &o)| {
                let diff = self.c[i] - self.delta[i];
                OrderReport {
                    order: o,
                    c_over_n: n.map(|n| self.c[i] / n),
                    noise_moment: self.noise_moments[i],
                    delta: n.filter(|_| known).map(|n| self.delta[i] / n),
                    estmom: log_det.filter(|_| known).map(|l| diff / l),
                    estmoment_ratio: n_log_n.filter(|_| known).map(|l| diff * diff / l),
                    pi_avg: log_det.filter(|_| known).map(|l| self.pi[i] / l),
                    g_over_log_n: log_n.filter(|_| known).map(|l| self.g[i] / l),
                    res5: log_n.filter(|_| known && self.has_limit).map(|l| self.res5[i] / l),
                    cvmoy: log_det.filter(|_| known).map(|l| self.cvmoy[i] / l),
                    target_ell: target_ell(o, self.d, self.sigma2),
                }
            })
            .collect();
        LedgerReport { n: self.n, log_n: self.log_n, log_det: self.log_det, orders }
    }
}
