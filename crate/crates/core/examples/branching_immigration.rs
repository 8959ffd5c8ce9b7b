//! Conditional least squares for a Poisson branching process with immigration,
//! plus Monte Carlo estimates of the stationary matrices.

use asclt_lab::estimators::ClsState;
use asclt_lab::models::{stationary_matrix_estimates, BranchingSimulator, BranchingSpec};

fn main() -> asclt_lab::Result<()> {
    let spec = BranchingSpec::poisson(0.5, 1.0)?;
    println!("true (m, λ) = {:?}, (σ², b²) = {:?}, E X = {}", spec.theta(), spec.eta(), spec.stationary_mean());
    let mut sim = BranchingSimulator::new(spec, 11)?;
    let mut cls = ClsState::new(spec)?;
    for n in 1..=500_000u64 {
        let out = cls.update(&sim.step()?)?;
        if n % 100_000 == 0 {
            println!("n={n:>6} theta_hat={:.4?} eta_hat={:.4?}", out.theta_hat, out.eta_hat);
        }
    }
    let st = stationary_matrix_estimates(&spec, 1_000, 200_000, 12)?;
    println!("L_hat = {:.4?}\nLambda_hat = {:.4?}", st.l_hat.rows(), st.lambda_hat.rows());
    Ok(())
}
