//! Log-averaged moments of `M_n² / s_{n−1}` for an AR(1) design converge to
//! the Gaussian moments `σ^{2p} (2p − 1)!!`.

use asclt_lab::harness::{run_experiment, ExperimentConfig, ModelConfig};
use asclt_lab::models::{ArSpec, NoiseSpec};

fn main() -> asclt_lab::Result<()> {
    let spec = ArSpec::new(vec![0.5], NoiseSpec::gaussian(1.0)?)?;
    let mut cfg = ExperimentConfig::new(ModelConfig::Ar(spec), 200_000, 4, 1);
    cfg.p_set = vec![1, 2, 3];
    let report = run_experiment(&cfg)?;
    println!("{:>8} {:>2} {:>10} {:>8}", "n", "p", "stat", "target");
    for snap in &report.merged {
        for m in snap.moment_reports() {
            println!("{:>8} {:>2} {:>10.4} {:>8}", snap.n, m.p, m.avg_scalar.unwrap_or(f64::NAN), m.gaussian_moment);
        }
    }
    Ok(())
}
