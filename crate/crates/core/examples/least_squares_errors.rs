//! Least squares on an AR(1) stream with the cumulative prediction and
//! estimation error functionals.

use asclt_lab::estimators::{ErrorLedger, LsState};
use asclt_lab::models::{limiting_matrix_ar, next_step, ArSimulator, ArSpec, NoiseSpec};
use asclt_lab::GramState;

fn main() -> asclt_lab::Result<()> {
    let noise = NoiseSpec::gaussian(1.0)?;
    let spec = ArSpec::new(vec![0.5], noise)?;
    let limit = limiting_matrix_ar(&spec)?;
    let mut sim = ArSimulator::new(spec.clone(), 3)?;
    let gram = GramState::identity(1)?;
    let prior = gram.log_det_prior();
    let mut ls = LsState::with_truth(&spec.theta, gram, Some(limit))?;
    let mut ledger = ErrorLedger::new(&[1, 2], 1, 1.0, |q| noise.even_moment(q))?;
    for n in 1..=1_000_000u64 {
        let step = next_step(&mut sim)?;
        let out = ls.update(&step.phi, step.x_next)?;
        ledger.update(&out, ls.gram().log_det() - prior);
        if n.is_power_of_two() && n >= 1 << 12 || n == 1_000_000 {
            let r = ledger.report();
            let o1 = r.order(1).unwrap();
            println!(
                "n={n:>7} theta_hat={:.5} n(Γ−Δ)/log d_n={:.4} res5={:.4} (target {})",
                ls.theta_hat()[0],
                o1.estmom.unwrap(),
                o1.res5.unwrap(),
                o1.target_ell
            );
        }
    }
    println!("normal-equation residual {:.2e}", ls.normal_equation_residual());
    Ok(())
}
