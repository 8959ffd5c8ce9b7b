#![allow(dead_code)]

use asclt_lab::SymMatrix;
use nalgebra::{DMatrix, DVector};

pub fn to_na(m: &SymMatrix) -> DMatrix<f64> {
    let d = m.dim();
    DMatrix::from_fn(d, d, |i, j| m.get(i, j))
}

pub fn max_abs_diff(a: &SymMatrix, b: &DMatrix<f64>) -> f64 {
    let d = a.dim();
    (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .fold(0.0f64, |w, (i, j)| w.max((a.get(i, j) - b[(i, j)]).abs()))
}

/// Accumulates `S0 + Σ Φ Φᵀ` densely and answers inverse, log det and solves
/// from scratch.
pub struct DenseGram {
    pub s: DMatrix<f64>,
}

impl DenseGram {
    pub fn new(s0: &SymMatrix) -> Self {
        Self { s: to_na(s0) }
    }

    pub fn add(&mut self, phi: &[f64]) {
        let v = DVector::from_column_slice(phi);
        self.s += &v * v.transpose();
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.s.clone().cholesky().expect("positive definite").inverse()
    }

    pub fn log_det(&self) -> f64 {
        let c = self.s.clone().cholesky().expect("positive definite");
        2.0 * c.l().diagonal().iter().map(|x| x.ln()).sum::<f64>()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let c = self.s.clone().cholesky().expect("positive definite");
        c.solve(&DVector::from_column_slice(b)).iter().copied().collect()
    }

    pub fn quad_inv(&self, x: &[f64]) -> f64 {
        let v = DVector::from_column_slice(x);
        let y = self.solve(x);
        v.iter().zip(&y).map(|(a, b)| a * b).sum()
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
