//! The vector martingale transform `M_n = M_0 + Σ Φ_{k-1} ε_k` and its
//! per-step quantities.
//!
//! Evaluation order inside [`TransformState::advance`] matters: `V_n` and
//! `g_n` are read against `S_{n-1}⁻¹`, then the regressor is absorbed, and
//! `h_n` is read against `S_n⁻¹`. With that ordering the Riccati identity
//! `a_n(1) = V_n − h_n = (1 − f_n) g_n²` holds exactly in exact arithmetic.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{GramState, SymMatrix, MAX_DIM};

/// Running martingale `M_n` together with the Gram state holding `S_{n-1}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformState {
    m: Vec<f64>,
    gram: GramState,
    n: u64,
}

/// Everything observed at step `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: u64,
    /// Explosion coefficient `f_n = Φ_nᵀ S_n⁻¹ Φ_n`.
    pub f: f64,
    /// `V_n = M_nᵀ S_{n-1}⁻¹ M_n`.
    #[serde(rename = "V")]
    pub v: f64,
    /// `g_n = M_nᵀ S_{n-1}⁻¹ Φ_n`.
    pub g: f64,
    /// `h_n = M_nᵀ S_n⁻¹ M_n`.
    pub h: f64,
    /// `a_n(1) = V_n − h_n`.
    pub a1: f64,
    /// `log d_n` after absorbing `Φ_n`.
    pub log_det: f64,
    /// The noise `ε_{n+1}` that moved `M_n` to `M_{n+1}`.
    pub eps: f64,
}

impl TransformState {
    /// Starts the transform at `M_0 = m0`; `gram` must hold only its prior.
    pub fn new(m0: Vec<f64>, gram: GramState) -> Result<Self> {
        if m0.len() != gram.dim() {
            return Err(Error::DimensionMismatch { expected: gram.dim(), found: m0.len() });
        }
        if gram.n() != -1 {
            return Err(Error::InvalidArgument(format!(
                "Gram state must be freshly initialized, found n = {}",
                gram.n()
            )));
        }
        if m0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial martingale"));
        }
        Ok(Self { m: m0, gram, n: 0 })
    }

    /// `M_0 = −S0 θ`, the start that makes `θ̂_n − θ = S_{n-1}⁻¹ M_n` hold
    /// for the least-squares estimator.
    pub fn for_known_parameter(theta: &[f64], gram: GramState) -> Result<Self> {
        let m0 = gram.s().mul_vec(theta)?.into_iter().map(|v| -v).collect();
        Self::new(m0, gram)
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn gram(&self) -> &GramState {
        &self.gram
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.m.len()
    }

    /// Performs step `n`: reads `V_n`, `g_n`, absorbs `phi`, reads `h_n`,
    /// then moves `M ← M + phi · eps`.
    pub fn advance(&mut self, phi: &[f64], eps: f64) -> Result<StepRecord> {
        if !eps.is_finite() {
            return Err(Error::NonFinite("noise"));
        }
        if phi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: phi.len() });
        }
        let d = self.dim();
        let mut buf = [0.0; MAX_DIM];
        let u = &mut buf[..d];
        self.gram.s_inv().mul_vec_into(&self.m, u);
        let v = crate::linalg::dot(&self.m, u).max(0.0);
        let g = crate::linalg::dot(phi, u);
        let f = self.gram.rank_one_update(phi)?;
        let h = self.gram.quadratic_form_unchecked(&self.m);
        let record = StepRecord {
            n: self.n,
            f,
            v,
            g,
            h,
            a1: v - h,
            log_det: self.gram.log_det(),
            eps,
        };
        for (mi, pi) in self.m.iter_mut().zip(phi) {
            *mi += pi * eps;
        }
        self.n += 1;
        Ok(record)
    }

    /// Diagnostics of the normalized recursion for the step about to be
    /// taken with regressor `phi`, given the limit `L` of `S_n / α_n`.
    ///
    /// `alpha_n` and `alpha_prev` are `α_n` and `α_{n-1}`; both must be positive.
    pub fn limit_diagnostics(
        &self,
        limit: &LimitMatrix,
        phi: &[f64],
        alpha_n: f64,
        alpha_prev: f64,
    ) -> Result<LimitDiagnostics> {
        if phi.len() != self.dim() || limit.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: if phi.len() != self.dim() { phi.len() } else { limit.dim() },
            });
        }
        if !(alpha_n > 0.0) || !(alpha_prev > 0.0) {
            return Err(Error::InvalidArgument("normalizations α must be positive".into()));
        }
        let l_inv = &limit.inverse;
        let beta_prev = l_inv.trace_product(self.gram.s())?;
        let phi_l_phi = l_inv.bilinear_unchecked(phi, phi);
        let m_l_m = l_inv.bilinear_unchecked(&self.m, &self.m);
        let m_l_phi = l_inv.bilinear_unchecked(&self.m, phi);
        let beta = beta_prev + phi_l_phi;
        Ok(LimitDiagnostics {
            beta,
            beta_prev,
            gamma: phi_l_phi / beta,
            m: m_l_m / beta_prev,
            delta: m_l_phi / beta,
            varphi: phi_l_phi / alpha_n,
            v: m_l_m / alpha_prev,
        })
    }
}

/// An invertible symmetric limit matrix `L` with its cached inverse.
#[derive(Clone, Debug)]
pub struct LimitMatrix {
    matrix: SymMatrix,
    inverse: SymMatrix,
}

impl LimitMatrix {
    pub fn new(matrix: SymMatrix) -> Result<Self> {
        let inverse = matrix.inverse()?;
        Ok(Self { matrix, inverse })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn inverse(&self) -> &SymMatrix {
        &self.inverse
    }
}

/// `β_n`, `γ_n`, `m_n`, `δ_n`, `φ_n`, `v_n` for one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitDiagnostics {
    /// `β_n = trace(L⁻¹ S_n)`.
    pub beta: f64,
    /// `β_{n-1}`.
    pub beta_prev: f64,
    pub gamma: f64,
    pub m: f64,
    pub delta: f64,
    pub varphi: f64,
    pub v: f64,
}

impl LimitDiagnostics {
    /// Right-hand side of the recursion for `m_{n+1}` given `ε_{n+1}`.
    pub fn predicted_next_m(&self, eps: f64) -> f64 {
        (1.0 - self.gamma) * self.m + 2.0 * self.delta * eps + self.gamma * eps * eps
    }
}

/// Residuals of the exact per-step identities, each scaled by the magnitude
/// of the terms involved. `pi` is the prediction gap `π_n` when the true
/// parameter is known.
pub fn check_step_identities(record: &StepRecord, pi: Option<f64>) -> Vec<(&'static str, f64)> {
    let riccati = (1.0 - record.f) * record.g * record.g;
    let mut out = vec![(
        "a1 = (1-f) g^2",
        relative(record.a1 - riccati, record.v.max(riccati)),
    )];
    if let Some(pi) = pi {
        let pred = (1.0 - record.f) * pi * pi;
        out.push(("a1 = (1-f) pi^2", relative(record.a1 - pred, record.v.max(pred))));
    }
    out
}

pub(crate) fn relative(diff: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        diff.abs() / scale
    } else {
        diff.abs()
    }
}

/// Writes step records as CSV rows `n,f,V,g,h,a1,log_det,eps`.
pub struct TraceWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(writer: W) -> Self {
        Self { inner: csv::Writer::from_writer(writer) }
    }

    pub fn write(&mut self, record: &StepRecord) -> Result<()> {
        self.inner.serialize(record)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}
