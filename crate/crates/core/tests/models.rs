mod common;

use asclt_lab::models::{
    analyze_ar, conditional_variance_v, limiting_matrix_ar, next_step, write_trajectory, ArSimulator, ArSpec,
    BranchingSimulator, BranchingSpec, BranchingStream, CountLaw, NoiseFamily, NoiseSpec, RandomWalkProbe,
    RegressionStream,
};
use asclt_lab::SymMatrix;
use common::to_na;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn noise_variance_within_band() {
    let n = 400_000;
    for family in [NoiseFamily::Gaussian, NoiseFamily::Rademacher, NoiseFamily::Uniform, NoiseFamily::ShiftedExponential] {
        let spec = NoiseSpec::new(family, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = spec.draw(&mut rng);
            s1 += x;
            s2 += x * x;
            s4 += x.powi(4);
        }
        let (mean, var) = (s1 / n as f64, s2 / n as f64);
        let m4 = spec.even_moment(2);
        // 5 standard errors
        assert!(mean.abs() < 5.0 * (2.0 / n as f64).sqrt(), "{family:?} mean {mean}");
        assert!((var - 2.0).abs() <= 5.0 * ((m4 - 4.0) / n as f64).sqrt() + 1e-9, "{family:?} var {var}");
        assert!((s4 / n as f64 - m4).abs() < 0.05 * m4, "{family:?} fourth moment");
    }
}

#[test]
fn companion_radius_matches_eigenvalues() {
    for theta in [vec![0.5], vec![0.5, 0.4], vec![0.0, -0.81], vec![0.3, -0.2, 0.1], vec![1.0, 0.5]] {
        let spec = ArSpec { theta: theta.clone(), noise: NoiseSpec::gaussian(1.0).unwrap() };
        let d = theta.len();
        let a = DMatrix::from_fn(d, d, |i, j| if i == 0 { theta[j] } else if i == j + 1 { 1.0 } else { 0.0 });
        let rho = a.complex_eigenvalues().iter().fold(0.0f64, |w, z| w.max(z.norm()));
        match analyze_ar(&spec) {
            Ok(an) => assert!((an.rho - rho).abs() < 1e-9, "{theta:?}: {} vs {rho}", an.rho),
            Err(_) => assert!(rho >= 1.0, "{theta:?} rejected with radius {rho}"),
        }
    }
}

#[test]
fn limiting_matrix_solves_lyapunov() {
    let spec = ArSpec::new(vec![0.5, 0.4], NoiseSpec::gaussian(1.5).unwrap()).unwrap();
    let l = to_na(&limiting_matrix_ar(&spec).unwrap());
    let a = DMatrix::from_row_slice(2, 2, &[0.5, 0.4, 1.0, 0.0]);
    let mut q = DMatrix::zeros(2, 2);
    q[(0, 0)] = 1.5;
    assert!((&a * &l * a.transpose() + q - &l).amax() < 1e-10);
}

#[test]
fn ar_gram_over_n_approaches_limit() {
    let spec = ArSpec::new(vec![0.5, 0.4], NoiseSpec::gaussian(1.0).unwrap()).unwrap();
    let l = limiting_matrix_ar(&spec).unwrap();
    let mut sim = ArSimulator::new(spec, 8).unwrap();
    let n = 1_000_000;
    let mut s = SymMatrix::zeros(2);
    for _ in 0..n {
        let st = next_step(&mut sim).unwrap();
        s.add_outer(&st.phi, 1.0);
    }
    let s = s.scaled(1.0 / n as f64);
    assert!(s.max_abs_diff(&l) < 0.05 * l.get(0, 0), "{:?} vs {:?}", s.rows(), l.rows());
}

#[test]
fn trajectory_dump_schema() {
    let spec = ArSpec::new(vec![0.5, 0.4], NoiseSpec::gaussian(1.0).unwrap()).unwrap();
    let mut sim = ArSimulator::new(spec, 1).unwrap();
    let mut buf = Vec::new();
    write_trajectory(&mut sim, 5, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,phi_0,phi_1,x_next,eps");
    assert_eq!(lines.len(), 6);
}

#[test]
fn same_seed_same_path_different_seed_different_path() {
    let spec = ArSpec::new(vec![0.5], NoiseSpec::gaussian(1.0).unwrap()).unwrap();
    let run = |seed| {
        let mut sim = ArSimulator::new(spec.clone(), seed).unwrap();
        (0..10).map(|_| next_step(&mut sim).unwrap().eps).collect::<Vec<_>>()
    };
    assert_eq!(run(3), run(3));
    assert!(run(3).iter().zip(run(4)).all(|(a, b)| *a != b));
}

#[test]
fn branching_mean_and_conditional_variance() {
    let spec = BranchingSpec::poisson(0.5, 1.0).unwrap();
    let mut sim = BranchingSimulator::new(spec, 21).unwrap();
    let n = 1_000_000;
    let mut sum = 0.0;
    // conditional second moment of V = ε² − σ²x − b² at x = 2
    let (mut cnt, mut v2) = (0u64, 0.0);
    for _ in 0..n {
        let st = sim.step().unwrap();
        sum += st.x_next as f64;
        if st.x == 2 {
            let eps = st.x_next as f64 - 0.5 * 2.0 - 1.0;
            let v = eps * eps - 0.5 * 2.0 - 1.0;
            v2 += v * v;
            cnt += 1;
        }
    }
    let mean = sum / n as f64;
    assert!((mean - spec.stationary_mean()).abs() < 0.02, "{mean}");
    let target = conditional_variance_v(&spec, 2);
    assert!((v2 / cnt as f64 - target).abs() < 0.05 * target, "{} vs {target}", v2 / cnt as f64);
}

#[test]
fn normalized_branching_stream_has_unit_scale_noise() {
    let spec = BranchingSpec::poisson(0.5, 1.0).unwrap();
    let mut s = BranchingStream::new(spec, 2).unwrap();
    assert_eq!(s.theta().unwrap(), &[0.5, 1.0]);
    let mut phi = [0.0; 2];
    let (mut sum, n) = (0.0, 200_000);
    for _ in 0..n {
        let obs = s.next_into(&mut phi).unwrap();
        let z = obs.x_next;
        assert!((z - (0.5 * phi[0] + phi[1]) - obs.eps).abs() < 1e-12);
        sum += obs.eps * obs.eps;
    }
    // E[ξ²] = E[(σ²X + b²)/(X + 1)] lies between min and max of σ², b²
    let m = sum / n as f64;
    assert!(m > 0.45 && m < 1.0, "{m}");
}

#[test]
fn branching_rejects_supercritical_and_caps_draws() {
    assert!(BranchingSpec::poisson(1.0, 1.0).is_err());
    assert!(BranchingSpec::poisson(0.5, 0.0).is_err());
    let spec = BranchingSpec {
        offspring: CountLaw::Geometric { mean: 0.9 },
        immigration: CountLaw::Deterministic { value: 1000 },
        draw_cap: 10,
    };
    let mut sim = BranchingSimulator::new(spec, 0).unwrap();
    sim.step().unwrap();
    assert!(sim.step().is_err());
}

#[test]
fn probe_walk_is_rademacher() {
    let mut p = RandomWalkProbe::new(NoiseSpec::gaussian(1.0).unwrap(), 3).unwrap();
    let mut phi = [0.0; 2];
    let mut prev = 0.0;
    for _ in 0..1000 {
        p.next_into(&mut phi).unwrap();
        assert_eq!(phi[0], 1.0);
        let step = (phi[1] - prev).abs();
        assert!(step == 0.0 || step == 1.0);
        prev = phi[1];
    }
}
