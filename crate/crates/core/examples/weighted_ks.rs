//! The `f_k`-weighted empirical measure of `M_k / sqrt(s_{k−1})` approaches
//! `N(0, σ²)`; distance measured by a binned KS statistic.

use asclt_lab::harness::{run_experiment, ExperimentConfig, ModelConfig};
use asclt_lab::models::{ArSpec, NoiseFamily, NoiseSpec};

fn main() -> asclt_lab::Result<()> {
    let noise = NoiseSpec::new(NoiseFamily::Uniform, 2.0)?;
    let spec = ArSpec::new(vec![-0.3], noise)?;
    let mut cfg = ExperimentConfig::new(ModelConfig::Ar(spec), 1_000_000, 4, 5);
    cfg.checkpoints = Some(vec![1_000, 10_000, 100_000, 1_000_000]);
    let report = run_experiment(&cfg)?;
    for snap in &report.merged {
        println!("n={:>8} KS={:.4}", snap.n, snap.ks(2.0).unwrap());
    }
    Ok(())
}
