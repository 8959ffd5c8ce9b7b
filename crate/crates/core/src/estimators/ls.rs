use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, GramState, SymMatrix, MAX_DIM};
use crate::martingale::{StepRecord, TransformState};

#[derive(Clone, Debug, Serialize, Deserialize)]
enum Track {
    /// The transform starts at `M_0 = −S0 θ` and is driven by `ε = X − θᵀΦ`.
    Known { transform: TransformState, theta: Vec<f64> },
    Unknown { gram: GramState },
}

/// Least squares `θ̂_n = S_{n-1}⁻¹ Σ Φ_{k-1} X_k`, re-solved from `(S, b)` each step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LsState {
    b: Vec<f64>,
    theta_hat: Vec<f64>,
    track: Track,
    limit: Option<SymMatrix>,
    k: u64,
}

/// What one least-squares step saw, evaluated at the pre-update estimate `θ̂_k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LsStep {
    pub k: u64,
    /// `X_{k+1} − θ̂_kᵀ Φ_k`.
    pub residual: f64,
    /// `ε_{k+1} = X_{k+1} − θᵀΦ_k` when `θ` is known.
    pub eps: Option<f64>,
    pub f: f64,
    /// `‖θ̂_k − θ‖²`.
    pub err_norm2: Option<f64>,
    /// `(θ̂_k − θ)ᵀ L (θ̂_k − θ)`, when a limit matrix was supplied.
    pub err_l_form: Option<f64>,
    /// `(θ̂_k − θ)ᵀ S_k (θ̂_k − θ) = V_k + g_k²`.
    pub err_s_form: Option<f64>,
    pub record: Option<StepRecord>,
}

impl LsStep {
    /// `π_k = residual − ε_{k+1}`.
    pub fn pi(&self) -> Option<f64> {
        self.eps.map(|e| self.residual - e)
    }
}

impl LsState {
    /// Tracks the estimation error against a known `θ`; `limit` enables the
    /// `L`-weighted error form.
    pub fn with_truth(theta: &[f64], gram: GramState, limit: Option<SymMatrix>) -> Result<Self> {
        if let Some(l) = &limit {
            if l.dim() != theta.len() {
                return Err(Error::DimensionMismatch { expected: theta.len(), found: l.dim() });
            }
        }
        let d = gram.dim();
        let transform = TransformState::for_known_parameter(theta, gram)?;
        Ok(Self {
            b: vec![0.0; d],
            theta_hat: vec![0.0; d],
            track: Track::Known { transform, theta: theta.to_vec() },
            limit,
            k: 0,
        })
    }

    pub fn new(gram: GramState) -> Result<Self> {
        if gram.n() != -1 {
            return Err(Error::InvalidArgument("Gram state must be freshly initialized".into()));
        }
        let d = gram.dim();
        Ok(Self { b: vec![0.0; d], theta_hat: vec![0.0; d], track: Track::Unknown { gram }, limit: None, k: 0 })
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn steps(&self) -> u64 {
        self.k
    }

    pub fn gram(&self) -> &GramState {
        match &self.track {
            Track::Known { transform, .. } => transform.gram(),
            Track::Unknown { gram } => gram,
        }
    }

    pub fn transform(&self) -> Option<&TransformState> {
        match &self.track {
            Track::Known { transform, .. } => Some(transform),
            Track::Unknown { .. } => None,
        }
    }

    pub fn theta(&self) -> Option<&[f64]> {
        match &self.track {
            Track::Known { theta, .. } => Some(theta),
            Track::Unknown { .. } => None,
        }
    }

    pub fn update(&mut self, phi: &[f64], x_next: f64) -> Result<LsStep> {
        let d = self.dim();
        if phi.len() != d {
            return Err(Error::DimensionMismatch { expected: d, found: phi.len() });
        }
        if !x_next.is_finite() || phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("least-squares input"));
        }
        let residual = x_next - dot(&self.theta_hat, phi);
        let mut err_buf = [0.0; MAX_DIM];
        let err = &mut err_buf[..d];
        let (f, eps, record, err_norm2, err_l_form, err_s_form) = match &mut self.track {
            Track::Known { transform, theta } => {
                for ((e, th), t) in err.iter_mut().zip(&self.theta_hat).zip(theta.iter()) {
                    *e = th - t;
                }
                let eps = x_next - dot(theta, phi);
                let rec = transform.advance(phi, eps)?;
                let l_form = self.limit.as_ref().map(|l| l.bilinear_unchecked(err, err).max(0.0));
                (rec.f, Some(eps), Some(rec), Some(dot(err, err)), l_form, Some(rec.v + rec.g * rec.g))
            }
            Track::Unknown { gram } => (gram.rank_one_update(phi)?, None, None, None, None, None),
        };
        for (bi, pi) in self.b.iter_mut().zip(phi) {
            *bi += pi * x_next;
        }
        let mut next = [0.0; MAX_DIM];
        self.gram().s_inv().mul_vec_into(&self.b, &mut next[..d]);
        self.theta_hat.copy_from_slice(&next[..d]);
        let out = LsStep { k: self.k, residual, eps, f, err_norm2, err_l_form, err_s_form, record };
        self.k += 1;
        Ok(out)
    }

    /// `max_i |(θ̂ − θ − S⁻¹M)_i|` at the current state.
    pub fn diff_identity_residual(&self) -> Option<f64> {
        let Track::Known { transform, theta } = &self.track else {
            return None;
        };
        let sm = transform.gram().s_inv().mul_vec(transform.m()).ok()?;
        Some(
            self.theta_hat
                .iter()
                .zip(theta)
                .zip(&sm)
                .fold(0.0f64, |w, ((th, t), s)| w.max((th - t - s).abs())),
        )
    }

    /// `max_i |(S θ̂ − b)_i|`, the normal-equation residual.
    pub fn normal_equation_residual(&self) -> f64 {
        let s_theta = self.gram().s().mul_vec(&self.theta_hat).expect("matching dimension");
        s_theta.iter().zip(&self.b).fold(0.0f64, |w, (a, b)| w.max((a - b).abs()))
    }
}
