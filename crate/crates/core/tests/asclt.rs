use asclt_lab::asclt::{
    gaussian_even_moment, normal_cdf, target_ell, target_lambda, weighted_ks, MomentAccumulator, WeightedHistogram,
};
use asclt_lab::estimators::{ErrorLedger, LsState};
use asclt_lab::models::{
    conditional_variance_v, next_step, ArSimulator, ArSpec, BranchingSimulator, BranchingSpec, BranchingStream,
    NoiseSpec, RegressionStream,
};
use asclt_lab::{GramState, SymMatrix, TransformState};

#[test]
fn target_values() {
    assert_eq!(target_ell(1, 1, 1.0), 1.0);
    assert_eq!(target_ell(2, 2, 1.0), 8.0);
    assert_eq!(target_ell(3, 1, 1.0), 15.0);
    assert_eq!(target_ell(3, 1, 1.0), gaussian_even_moment(3, 1.0));
    assert_eq!(target_lambda(1, 1, 1.0), 1.0);
    assert_eq!(target_lambda(2, 2, 1.0), 8.0);
    assert_eq!(target_lambda(1, 3, 2.0), 2.0);
    assert_eq!(gaussian_even_moment(1, 2.5), 2.5);
    assert_eq!(gaussian_even_moment(2, 1.0), 3.0);
    assert_eq!(gaussian_even_moment(4, 1.0), 105.0);
}

#[test]
fn hand_trajectory_sum() {
    // S0 = 1, M0 = 0; step 1: Φ=1, ε=1; step 2: Φ=1, ε=0
    let mut tr = TransformState::new(vec![0.0], GramState::identity(1).unwrap()).unwrap();
    let mut acc = MomentAccumulator::new(1, 1, 1.0, 0.0).unwrap();
    let r1 = tr.advance(&[1.0], 1.0).unwrap();
    acc.accumulate(&r1);
    let r2 = tr.advance(&[1.0], 0.0).unwrap();
    acc.accumulate(&r2);
    assert!((r2.v - 0.5).abs() < 1e-15 && (r2.g - 0.5).abs() < 1e-15);
    assert!((r2.f - 1.0 / 3.0).abs() < 1e-15 && (r2.h - 1.0 / 3.0).abs() < 1e-15);
    assert!((r2.a1 - 1.0 / 6.0).abs() < 1e-15);
    assert!((acc.sum_fv() - 1.0 / 6.0).abs() < 1e-15);
}

#[test]
fn ks_of_exact_gaussian_mass_is_small() {
    let mut h = WeightedHistogram::for_sigma2(2.0).unwrap();
    let edges = h.edges();
    let s = 2f64.sqrt();
    for w in edges.windows(2) {
        let mass = normal_cdf(w[1] / s) - normal_cdf(w[0] / s);
        h.add(0.5 * (w[0] + w[1]), mass);
    }
    // half the largest bin mass
    assert!(weighted_ks(&h, 2.0).unwrap() < 0.015);
    let mut point = WeightedHistogram::for_sigma2(1.0).unwrap();
    point.add(0.0, 1.0);
    assert!((weighted_ks(&point, 1.0).unwrap() - 0.5).abs() < 0.01);
}

#[test]
fn prediction_moments_converge() {
    let noise = NoiseSpec::gaussian(1.0).unwrap();
    let spec = ArSpec::new(vec![0.5], noise).unwrap();
    let mut sim = ArSimulator::new(spec.clone(), 31).unwrap();
    let mut ls = LsState::with_truth(&spec.theta, GramState::identity(1).unwrap(), None).unwrap();
    let mut ledger = ErrorLedger::new(&[1, 2], 1, 1.0, |q| noise.even_moment(q)).unwrap();
    for _ in 0..1_000_000 {
        let st = next_step(&mut sim).unwrap();
        let out = ls.update(&st.phi, st.x_next).unwrap();
        ledger.update(&out, ls.gram().log_det());
    }
    let r = ledger.report();
    assert!((r.order(1).unwrap().c_over_n.unwrap() - 1.0).abs() < 0.05);
    assert!((r.order(2).unwrap().c_over_n.unwrap() - 3.0).abs() < 0.3);
}

#[test]
fn branching_transform_identity() {
    let spec = BranchingSpec::poisson(0.5, 1.0).unwrap();
    let mut stream = BranchingStream::new(spec, 77).unwrap();
    let theta = stream.theta().unwrap().to_vec();
    let mut ls = LsState::with_truth(&theta, GramState::identity(2).unwrap(), None).unwrap();
    let mut phi = [0.0; 2];
    for k in 0..20_000 {
        let obs = stream.next_into(&mut phi).unwrap();
        ls.update(&phi, obs.x_next).unwrap();
        if k % 1000 == 0 {
            assert!(ls.diff_identity_residual().unwrap() <= 1e-9);
        }
    }
}

#[test]
fn conditional_variance_polynomial_matches_binned_residuals() {
    let spec = BranchingSpec::poisson(0.5, 1.0).unwrap();
    assert!((conditional_variance_v(&spec, 0) - 3.0).abs() < 1e-12);
    assert!((conditional_variance_v(&spec, 1) - 6.0).abs() < 1e-12);
    let mut sim = BranchingSimulator::new(spec, 99).unwrap();
    let mut bins = [(0u64, 0.0f64); 4];
    for _ in 0..10_000_000 {
        let st = sim.step().unwrap();
        if let Some(b) = bins.get_mut(st.x as usize) {
            let x = st.x as f64;
            let eps = st.x_next as f64 - 0.5 * x - 1.0;
            let v = eps * eps - 0.5 * x - 1.0;
            b.0 += 1;
            b.1 += v * v;
        }
    }
    for (x, (n, s)) in bins.iter().enumerate() {
        let target = conditional_variance_v(&spec, x as u64);
        let got = s / *n as f64;
        assert!((got - target).abs() < 0.1 * target, "x={x}: {got} vs {target}");
    }
}

#[test]
fn accumulator_merge_is_pooled_ratio() {
    let mk = |seed| {
        let spec = ArSpec::new(vec![0.5], NoiseSpec::gaussian(1.0).unwrap()).unwrap();
        let mut sim = ArSimulator::new(spec, seed).unwrap();
        let mut tr = TransformState::new(vec![0.0], GramState::new(SymMatrix::identity(1)).unwrap()).unwrap();
        let mut acc = MomentAccumulator::new(2, 1, 1.0, 0.0).unwrap();
        for _ in 0..5_000 {
            let st = next_step(&mut sim).unwrap();
            acc.accumulate(&tr.advance(&st.phi, st.eps).unwrap());
        }
        acc
    };
    let (a, b) = (mk(1), mk(2));
    let m = a.merge(&b).unwrap();
    let want = (a.sum_fv() + b.sum_fv()) / (a.normalizer() + b.normalizer());
    assert!((m.report().unwrap().avg_fv - want).abs() <= 1e-12 * want);
    assert!(a.merge(&MomentAccumulator::new(1, 1, 1.0, 0.0).unwrap()).is_err());
}
