//! Design `(1, W_n)` with a random walk `W`: the Gram eigenvalues grow at
//! rates `n` and `n²`. Prints the two log-averaged statistics and their
//! running maxima, plus a stable AR(2) control through the same path.

use asclt_lab::harness::{conjecture_probe, ExperimentConfig, ModelConfig};
use asclt_lab::models::{ArSpec, NoiseSpec};

fn main() -> asclt_lab::Result<()> {
    let noise = NoiseSpec::gaussian(1.0)?;
    let probe = ExperimentConfig::new(ModelConfig::Probe { noise }, 300_000, 2, 9);
    let control = ExperimentConfig::new(ModelConfig::Ar(ArSpec::new(vec![0.5, 0.4], noise)?), 300_000, 2, 9);
    for (label, cfg) in [("random walk", probe), ("AR(2) control", control)] {
        let rep = conjecture_probe(&cfg)?;
        println!("{label} (all finite: {})", rep.all_finite);
        for r in rep.rows.iter().filter(|r| r.replication == 0) {
            println!(
                "  n={:>7} p={} fV={:.4} ap={:.4} max fV={:.4} max ap={:.4}",
                r.n, r.p, r.avg_fv, r.avg_ap, r.max_avg_fv, r.max_avg_ap
            );
        }
    }
    Ok(())
}
