mod common;

use asclt_lab::{GramState, SymMatrix};
use common::{max_abs_diff, rel, DenseGram};
use proptest::prelude::*;

fn prior(d: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-1.0f64..1.0, d * d).prop_map(move |a| {
        SymMatrix::from_fn(d, |i, j| (0..d).map(|k| a[i * d + k] * a[j * d + k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 })
    })
}

fn case() -> impl Strategy<Value = (SymMatrix, Vec<Vec<f64>>)> {
    (1usize..=5).prop_flat_map(|d| (prior(d), prop::collection::vec(prop::collection::vec(-5.0f64..5.0, d), 1..60)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tracked_inverse_and_log_det_match_dense((s0, phis) in case()) {
        let mut gram = GramState::new(s0.clone()).unwrap();
        let mut dense = DenseGram::new(&s0);
        for phi in &phis {
            let prev = dense.log_det();
            let f = gram.rank_one_update(phi).unwrap();
            dense.add(phi);
            let inv = dense.inverse();
            let scale = inv.amax();
            prop_assert!(max_abs_diff(gram.s_inv(), &inv) <= 1e-9 * scale);
            prop_assert!((gram.log_det() - dense.log_det()).abs() <= 1e-9 * dense.log_det().abs().max(1.0));
            // f = Φᵀ S⁻¹ Φ = (d_n − d_{n−1}) / d_n
            let f_dense = dense.quad_inv(phi);
            prop_assert!(f >= 0.0 && f < 1.0);
            prop_assert!(rel(f, f_dense) <= 1e-9 || (f - f_dense).abs() < 1e-14);
            let f_det = -(-(dense.log_det() - prev)).exp_m1();
            prop_assert!((f - f_det).abs() <= 1e-9 * f.max(1e-6));
        }
        prop_assert_eq!(gram.n(), phis.len() as i64 - 1);
    }

    #[test]
    fn log_det_never_decreases((s0, phis) in case()) {
        let mut gram = GramState::new(s0).unwrap();
        let mut prev = gram.log_det();
        for phi in &phis {
            gram.rank_one_update(phi).unwrap();
            prop_assert!(gram.log_det() >= prev);
            prev = gram.log_det();
        }
    }

    #[test]
    fn refresh_keeps_state((s0, phis) in case()) {
        let mut a = GramState::new(s0.clone()).unwrap();
        let mut b = GramState::with_refresh_interval(s0, 3).unwrap();
        for phi in &phis {
            a.rank_one_update(phi).unwrap();
            b.rank_one_update(phi).unwrap();
        }
        prop_assert!(a.s_inv().max_abs_diff(b.s_inv()) <= 1e-9 * a.s_inv().as_slice().iter().fold(0.0f64, |w, v| w.max(v.abs())));
        prop_assert!((a.log_det() - b.log_det()).abs() <= 1e-9 * a.log_det().abs().max(1.0));
        prop_assert!(b.s().product_identity_residual(b.s_inv()) <= 1e-8);
    }

    #[test]
    fn cholesky_solves(s in (1usize..=6).prop_flat_map(prior), seed in any::<u64>()) {
        let d = s.dim();
        let x: Vec<f64> = (0..d).map(|i| ((seed >> (i % 60)) & 0xff) as f64 / 50.0 - 2.5).collect();
        let b = s.mul_vec(&x).unwrap();
        let chol = s.cholesky().unwrap();
        let mut y = b.clone();
        chol.solve_in_place(&mut y);
        for (u, v) in x.iter().zip(&y) {
            prop_assert!((u - v).abs() <= 1e-8 * (1.0 + u.abs()));
        }
        let dense = DenseGram::new(&s);
        prop_assert!((chol.log_det() - dense.log_det()).abs() <= 1e-10 * dense.log_det().abs().max(1.0));
    }
}

#[test]
fn rejects_bad_input() {
    assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).is_err());
    assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap().cholesky().is_err());
    let mut g = GramState::identity(2).unwrap();
    assert!(g.rank_one_update(&[1.0]).is_err());
    assert!(g.rank_one_update(&[f64::NAN, 0.0]).is_err());
    assert_eq!(g.n(), -1);
}

#[test]
fn corrupted_inverse_is_repaired_at_refresh() {
    let mut g = GramState::with_refresh_interval(SymMatrix::identity(3), 10).unwrap();
    for k in 0..5 {
        g.rank_one_update(&[1.0, k as f64, 0.5]).unwrap();
    }
    g.perturb_inverse(0, 1, 1e-3);
    assert!(g.s().product_identity_residual(g.s_inv()) > 1e-8);
    g.refresh().unwrap();
    assert!(g.s().product_identity_residual(g.s_inv()) <= 1e-10);
}
