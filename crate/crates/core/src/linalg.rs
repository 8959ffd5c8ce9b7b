//! Dense symmetric matrices and the regularized Gram state `S_n = S + Σ Φ_k Φ_kᵀ`.
//!
//! [`GramState`] keeps `S_n`, its inverse and `log det S_n` in step with
//! rank-one updates. The inverse follows the Sherman–Morrison recursion and
//! is periodically rebuilt from a Cholesky factorization of `S_n`, which is
//! itself accumulated exactly (plain sums of outer products).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 64;

/// Default number of rank-one updates between two factorization refreshes.
pub const DEFAULT_REFRESH_INTERVAL: usize = 4096;

const SYMMETRY_TOL: f64 = 1e-12;

/// A dense symmetric `d × d` matrix stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m.data[i * values.len() + i] = v;
        }
        m
    }

    /// Builds a matrix from rows, rejecting non-square or non-symmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(dim, data)
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix entries"));
        }
        let m = Self { dim, data };
        m.check_symmetric()?;
        Ok(m)
    }

    /// Symmetric matrix from a generator evaluated on the upper triangle.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i * dim + j] = v;
                m.data[j * dim + i] = v;
            }
        }
        m
    }

    fn check_symmetric(&self) -> Result<()> {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                let a = self.data[i * d + j];
                let b = self.data[j * d + i];
                if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs()) {
                    return Err(Error::NotSymmetric { i, j, a, b });
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|v| v * factor).collect() }
    }

    /// `out = self · x`.
    #[inline]
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let row = &self.data[i * d..(i + 1) * d];
            *o = dot(row, x);
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x.len())?;
        let mut out = vec![0.0; self.dim];
        self.mul_vec_into(x, &mut out);
        Ok(out)
    }

    /// `xᵀ · self · y`.
    #[inline]
    pub fn bilinear_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            let row = &self.data[i * d..(i + 1) * d];
            acc += x[i] * dot(row, y);
        }
        acc
    }

    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        Ok(self.bilinear_unchecked(x, x))
    }

    /// `trace(self · other)`.
    pub fn trace_product(&self, other: &SymMatrix) -> Result<f64> {
        self.check_len(other.dim)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `self += scale · v vᵀ`.
    #[inline]
    pub fn add_outer(&mut self, v: &[f64], scale: f64) {
        let d = self.dim;
        for i in 0..d {
            let vi = scale * v[i];
            let row = &mut self.data[i * d..(i + 1) * d];
            for (r, vj) in row.iter_mut().zip(v) {
                *r += vi * vj;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Max-norm distance of `self · other` from the identity.
    pub fn product_identity_residual(&self, other: &SymMatrix) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += self.data[i * d + k] * other.data[k * d + j];
                }
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((acc - target).abs());
            }
        }
        worst
    }

    pub fn cholesky(&self) -> Result<Cholesky> {
        Cholesky::factor(self)
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        Ok(self.cholesky()?.inverse())
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(self.cholesky()?.log_det())
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: len });
        }
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular factor `L` with `A = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    dim: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors `a`; a non-positive pivot at step `k` means the leading minor
    /// of order `k + 1` is not positive.
    pub fn factor(a: &SymMatrix) -> Result<Self> {
        let d = a.dim;
        if d == 0 {
            return Err(Error::UnsupportedDimension(0));
        }
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag -= l[j * d + k] * l[j * d + k];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite { minor: j + 1 });
            }
            let ljj = diag.sqrt();
            l[j * d + j] = ljj;
            for i in (j + 1)..d {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / ljj;
            }
        }
        Ok(Self { dim: d, lower: l })
    }

    pub fn log_det(&self) -> f64 {
        let d = self.dim;
        2.0 * (0..d).map(|i| self.lower[i * d + i].ln()).sum::<f64>()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * d + k] * b[k];
            }
            b[i] = s / self.lower[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = b[i];
            for k in (i + 1)..d {
                s -= self.lower[k * d + i] * b[k];
            }
            b[i] = s / self.lower[i * d + i];
        }
    }

    pub fn inverse(&self) -> SymMatrix {
        let d = self.dim;
        let mut inv = SymMatrix::zeros(d);
        let mut col = vec![0.0; d];
        for j in 0..d {
            col.iter_mut().for_each(|c| *c = 0.0);
            col[j] = 1.0;
            self.solve_in_place(&mut col);
            for i in 0..d {
                inv.data[i * d + j] = col[i];
            }
        }
        // Symmetrize away the rounding asymmetry of the two triangular solves.
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (inv.data[i * d + j] + inv.data[j * d + i]);
                inv.data[i * d + j] = v;
                inv.data[j * d + i] = v;
            }
        }
        inv
    }
}

/// `S_n`, `S_n⁻¹` and `log det S_n`, maintained under rank-one updates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GramState {
    s: SymMatrix,
    s_inv: SymMatrix,
    log_det: f64,
    log_det_prior: f64,
    n: i64,
    updates_since_refresh: usize,
    refresh_interval: usize,
}

impl GramState {
    /// Installs the prior `S0`; the state starts at `n = -1`.
    pub fn new(s0: SymMatrix) -> Result<Self> {
        Self::with_refresh_interval(s0, DEFAULT_REFRESH_INTERVAL)
    }

    pub fn with_refresh_interval(s0: SymMatrix, refresh_interval: usize) -> Result<Self> {
        let d = s0.dim();
        if d == 0 || d > MAX_DIM {
            return Err(Error::UnsupportedDimension(d));
        }
        if refresh_interval == 0 {
            return Err(Error::InvalidArgument("refresh interval must be positive".into()));
        }
        s0.check_symmetric()?;
        let chol = s0.cholesky()?;
        let log_det = chol.log_det();
        Ok(Self {
            s_inv: chol.inverse(),
            s: s0,
            log_det,
            log_det_prior: log_det,
            n: -1,
            updates_since_refresh: 0,
            refresh_interval,
        })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(SymMatrix::identity(dim))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.s.dim
    }

    /// Index of the last absorbed regressor (`-1` when only the prior is installed).
    #[inline]
    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn s(&self) -> &SymMatrix {
        &self.s
    }

    pub fn s_inv(&self) -> &SymMatrix {
        &self.s_inv
    }

    #[inline]
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `log det S0` of the installed prior.
    #[inline]
    pub fn log_det_prior(&self) -> f64 {
        self.log_det_prior
    }

    /// `log d_n − log det S0`.
    #[inline]
    pub fn log_det_net(&self) -> f64 {
        self.log_det - self.log_det_prior
    }

    pub fn updates_since_refresh(&self) -> usize {
        self.updates_since_refresh
    }

    pub fn refresh_interval(&self) -> usize {
        self.refresh_interval
    }

    /// Absorbs `phi`: `S ← S + phi phiᵀ`. Returns the explosion coefficient
    /// `f = phiᵀ S_new⁻¹ phi = c / (1 + c)` with `c = phiᵀ S_old⁻¹ phi`.
    pub fn rank_one_update(&mut self, phi: &[f64]) -> Result<f64> {
        self.check_vec(phi, "regressor")?;
        let d = self.dim();
        let mut buf = [0.0; MAX_DIM];
        let u = &mut buf[..d];
        self.s_inv.mul_vec_into(phi, u);
        let mut c = dot(phi, u);
        if c < 0.0 {
            self.refresh()?;
            self.s_inv.mul_vec_into(phi, u);
            c = dot(phi, u);
            if c < 0.0 {
                return Err(Error::StateCorruption(format!(
                    "negative quadratic form {c:e} after refresh"
                )));
            }
        }
        self.s.add_outer(phi, 1.0);
        self.s_inv.add_outer(u, -1.0 / (1.0 + c));
        self.log_det += c.ln_1p();
        self.n += 1;
        self.updates_since_refresh += 1;
        if self.updates_since_refresh > self.refresh_interval {
            self.refresh()?;
        }
        Ok(c / (1.0 + c))
    }

    /// Rebuilds `S⁻¹` and `log det S` from a fresh factorization of `S`.
    pub fn refresh(&mut self) -> Result<()> {
        let chol = self
            .s
            .cholesky()
            .map_err(|e| Error::StateCorruption(format!("Gram matrix lost definiteness: {e}")))?;
        self.s_inv = chol.inverse();
        self.log_det = chol.log_det();
        self.updates_since_refresh = 0;
        let residual = self.s.product_identity_residual(&self.s_inv);
        if !(residual <= 1e-8) {
            return Err(Error::StateCorruption(format!(
                "refreshed inverse residual {residual:e} exceeds 1e-8"
            )));
        }
        Ok(())
    }

    /// `xᵀ S⁻¹ x`, clamped at zero.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        self.check_vec(x, "quadratic form argument")?;
        Ok(self.quadratic_form_unchecked(x))
    }

    #[inline]
    pub(crate) fn quadratic_form_unchecked(&self, x: &[f64]) -> f64 {
        self.s_inv.bilinear_unchecked(x, x).max(0.0)
    }

    /// `xᵀ S⁻¹ y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_vec(x, "bilinear argument")?;
        self.check_vec(y, "bilinear argument")?;
        Ok(self.s_inv.bilinear_unchecked(x, y))
    }

    /// `S⁻¹ x`.
    pub fn solve(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_vec(x, "right-hand side")?;
        let mut out = vec![0.0; self.dim()];
        self.s_inv.mul_vec_into(x, &mut out);
        Ok(out)
    }

    /// Overwrites one entry pair of the tracked inverse; for exercising refresh.
    #[doc(hidden)]
    pub fn perturb_inverse(&mut self, i: usize, j: usize, delta: f64) {
        let d = self.dim();
        self.s_inv.data[i * d + j] += delta;
        if i != j {
            self.s_inv.data[j * d + i] += delta;
        }
    }

    fn check_vec(&self, x: &[f64], what: &'static str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn identity_prior() {
        let g = GramState::identity(2).unwrap();
        assert_eq!(g.log_det(), 0.0);
        assert_eq!(g.s_inv(), &SymMatrix::identity(2));
        assert_eq!(g.n(), -1);
    }

    #[test]
    fn diagonal_prior() {
        let g = GramState::new(SymMatrix::diag(&[2.0, 4.0])).unwrap();
        assert!(close(g.log_det(), 8f64.ln(), 1e-15));
        assert!(g.s_inv().max_abs_diff(&SymMatrix::diag(&[0.5, 0.25])) < 1e-15);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let err = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { i: 0, j: 1, .. }));

        let indefinite = SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let err = GramState::new(indefinite).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { minor: 2 }));

        let err = GramState::new(SymMatrix::diag(&[-1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { minor: 1 }));
    }

    #[test]
    fn scalar_update() {
        let mut g = GramState::identity(1).unwrap();
        let f = g.rank_one_update(&[1.0]).unwrap();
        assert_eq!(f, 0.5);
        assert_eq!(g.s().get(0, 0), 2.0);
        assert!(close(g.log_det(), 2f64.ln(), 1e-15));
        assert_eq!(g.n(), 0);
    }

    #[test]
    fn diagonal_update_matches_determinant_ratio() {
        let mut g = GramState::identity(2).unwrap();
        let before = g.log_det();
        let f = g.rank_one_update(&[1.0, 0.0]).unwrap();
        assert!(g.s_inv().max_abs_diff(&SymMatrix::diag(&[0.5, 1.0])) < 1e-15);
        assert_eq!(f, 0.5);
        let ratio = -(-(g.log_det() - before)).exp_m1();
        assert!(close(f, ratio, 1e-15));
    }

    #[test]
    fn zero_regressor_only_advances_the_index() {
        let mut g = GramState::identity(3).unwrap();
        let before = g.clone();
        let f = g.rank_one_update(&[0.0; 3]).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(g.s(), before.s());
        assert_eq!(g.s_inv(), before.s_inv());
        assert_eq!(g.log_det(), before.log_det());
        assert_eq!(g.n(), 0);
    }

    #[test]
    fn rejects_bad_regressors() {
        let mut g = GramState::identity(2).unwrap();
        assert!(matches!(g.rank_one_update(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(g.rank_one_update(&[f64::NAN, 0.0]), Err(Error::NonFinite(_))));
        assert!(matches!(g.quadratic_form(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn quadratic_forms() {
        let g = GramState::identity(2).unwrap();
        assert_eq!(g.quadratic_form(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(g.quadratic_form(&[3.0, 4.0]).unwrap(), 25.0);
    }

    #[test]
    fn refresh_is_idempotent_on_fresh_state() {
        let s0 = SymMatrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let mut g = GramState::new(s0).unwrap();
        let before = g.clone();
        g.refresh().unwrap();
        assert!(g.s_inv().max_abs_diff(before.s_inv()) < 1e-12);
        assert!((g.log_det() - before.log_det()).abs() < 1e-12);
    }

    #[test]
    fn refresh_repairs_a_perturbed_inverse() {
        let mut g = GramState::identity(3).unwrap();
        g.rank_one_update(&[1.0, 2.0, 3.0]).unwrap();
        g.perturb_inverse(0, 2, 0.3);
        assert!(g.s().product_identity_residual(g.s_inv()) > 0.1);
        g.refresh().unwrap();
        assert!(g.s().product_identity_residual(g.s_inv()) <= 1e-10);
        assert_eq!(g.updates_since_refresh(), 0);
    }

    #[test]
    fn refresh_triggers_after_interval() {
        let mut g = GramState::with_refresh_interval(SymMatrix::identity(2), 3).unwrap();
        for k in 0..3 {
            g.rank_one_update(&[1.0, k as f64]).unwrap();
        }
        assert_eq!(g.updates_since_refresh(), 3);
        g.rank_one_update(&[0.5, 0.5]).unwrap();
        assert_eq!(g.updates_since_refresh(), 0);
    }

    #[test]
    fn cholesky_solve() {
        let a = SymMatrix::from_rows(&[
            vec![4.0, 2.0, 0.4],
            vec![2.0, 5.0, 1.0],
            vec![0.4, 1.0, 3.0],
        ])
        .unwrap();
        let chol = a.cholesky().unwrap();
        let mut b = vec![1.0, -2.0, 0.5];
        chol.solve_in_place(&mut b);
        let back = a.mul_vec(&b).unwrap();
        for (x, y) in back.iter().zip([1.0, -2.0, 0.5]) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
