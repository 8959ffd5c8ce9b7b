//! Loads a JSON configuration, runs it, evaluates the applicable criteria and
//! writes the CSV tables and summary.
//!
//! ```text
//! cargo run --release --example experiment_config -- configs/ar1.json out/ar1
//! ```

use asclt_lab::harness::{emit_reports, evaluate, run_experiment, ExperimentConfig};

fn main() -> asclt_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ar1.json").into());
    let out = args.next().unwrap_or_else(|| "target/asclt-out".into());
    let mut cfg = ExperimentConfig::load(&path)?;
    // keep the default run short
    cfg.n_steps = cfg.n_steps.min(100_000);
    cfg.replications = cfg.replications.min(4);
    cfg.checkpoints = None;
    let report = run_experiment(&cfg)?;
    let verdicts = evaluate(&report);
    for v in &verdicts {
        println!("{}", v.line());
    }
    for p in emit_reports(&report, &verdicts, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
