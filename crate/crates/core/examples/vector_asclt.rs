//! Vector statistics `(1/log d_n) Σ f_k V_k^p` and `(1/log d_n) Σ a_k(p)`
//! for AR(2) against `ℓ(p)` and `λ(p)`.

use asclt_lab::harness::{moment_table, run_experiment, ExperimentConfig, ModelConfig};
use asclt_lab::models::{analyze_ar, limiting_matrix_ar, ArSpec, NoiseSpec};

fn main() -> asclt_lab::Result<()> {
    let spec = ArSpec::new(vec![0.5, 0.4], NoiseSpec::gaussian(1.0)?)?;
    let an = analyze_ar(&spec)?;
    let l = limiting_matrix_ar(&spec)?;
    println!("spectral radius {:.4}, L = {:?}", an.rho, l.rows());
    let cfg = ExperimentConfig::new(ModelConfig::Ar(spec), 300_000, 4, 2);
    let report = run_experiment(&cfg)?;
    print!("{}", moment_table(&report));
    Ok(())
}
