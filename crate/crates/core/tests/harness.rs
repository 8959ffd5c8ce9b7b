use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use asclt_lab::harness::emit::{
    ASCLT_CSV, ASCLT_MERGED_CSV, BRANCHING_CSV, CSV_FILES, ESTIMATION_CSV, PREDICTION_CSV, PROBE_CSV, SUMMARY_JSON,
};
use asclt_lab::harness::{
    conjecture_probe, emit_reports, evaluate, merge_snapshots, replication_seed, run_experiment,
    run_experiment_with_threads, ExperimentConfig, ModelConfig, RunReport, Summary,
};
use asclt_lab::models::{next_step, ArSimulator, ArSpec, BranchingSpec, CountLaw, NoiseSpec};
use asclt_lab::Error;

fn ar1(n_steps: u64, replications: u32) -> ExperimentConfig {
    let spec = ArSpec::new(vec![0.5], NoiseSpec::gaussian(1.0).unwrap()).unwrap();
    ExperimentConfig::new(ModelConfig::Ar(spec), n_steps, replications, 20081208)
}

fn ar2(n_steps: u64, replications: u32) -> ExperimentConfig {
    let spec = ArSpec::new(vec![0.5, 0.4], NoiseSpec::gaussian(1.0).unwrap()).unwrap();
    ExperimentConfig::new(ModelConfig::Ar(spec), n_steps, replications, 7)
}

fn branching(n_steps: u64, replications: u32) -> ExperimentConfig {
    let mut cfg =
        ExperimentConfig::new(ModelConfig::Branching(BranchingSpec::poisson(0.5, 1.0).unwrap()), n_steps, replications, 5);
    cfg.stationary.samples = 10_000;
    cfg
}

fn emitted(report: &RunReport, dir: &Path) -> BTreeMap<&'static str, Vec<u8>> {
    emit_reports(report, &evaluate(report), dir).unwrap();
    CSV_FILES.iter().map(|&f| (f, fs::read(dir.join(f)).unwrap())).collect()
}

fn rows(bytes: &[u8]) -> usize {
    String::from_utf8_lossy(bytes).lines().count() - 1
}

#[test]
fn rerun_is_byte_identical() {
    for cfg in [ar1(3_000, 2), ar2(3_000, 2), branching(3_000, 2)] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let first = emitted(&run_experiment(&cfg).unwrap(), a.path());
        let second = emitted(&run_experiment(&cfg).unwrap(), b.path());
        assert_eq!(first, second);
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let cfg = ar2(5_000, 5);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = emitted(&run_experiment_with_threads(&cfg, 1).unwrap(), a.path());
    let four = emitted(&run_experiment_with_threads(&cfg, 4).unwrap(), b.path());
    assert_eq!(one, four);
}

#[test]
fn replications_use_distinct_noise() {
    let spec = ArSpec::new(vec![0.5], NoiseSpec::gaussian(1.0).unwrap()).unwrap();
    let draws = |r| {
        let mut sim = ArSimulator::new(spec.clone(), replication_seed(20081208, r)).unwrap();
        (0..10).map(|_| next_step(&mut sim).unwrap().eps).collect::<Vec<_>>()
    };
    let (a, b) = (draws(0), draws(1));
    assert!(a.iter().zip(&b).all(|(x, y)| x != y));
    let rep = run_experiment(&ar1(1_000, 2)).unwrap();
    assert_ne!(rep.replications[0].seed, rep.replications[1].seed);
    assert_ne!(rep.replications[0].snapshots, rep.replications[1].snapshots);
}

#[test]
fn csv_row_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ar1(30_000, 3);
    let rep = run_experiment(&cfg).unwrap();
    let cp = rep.checkpoints.len();
    assert_eq!(cp, 4);
    let files = emitted(&rep, dir.path());
    let p = cfg.p_set.len();
    assert_eq!(rows(&files[ASCLT_CSV]), cp * 3 * p);
    assert_eq!(rows(&files[ASCLT_MERGED_CSV]), cp * p);
    assert_eq!(rows(&files[ESTIMATION_CSV]), cp * 3);
    assert_eq!(rows(&files[PREDICTION_CSV]), cp * 3);
    assert_eq!(rows(&files[PROBE_CSV]), cp * 3 * p);
    assert_eq!(rows(&files[BRANCHING_CSV]), 0);

    let rep = run_experiment(&branching(3_000, 2)).unwrap();
    let files = emitted(&rep, dir.path());
    assert_eq!(rows(&files[BRANCHING_CSV]), rep.checkpoints.len() * 2);
    assert_eq!(rows(&files[ASCLT_CSV]), 0);
}

#[test]
fn summary_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [ar1(3_000, 2), branching(3_000, 2)] {
        let rep = run_experiment(&cfg).unwrap();
        emitted(&rep, dir.path());
        let text = fs::read_to_string(dir.path().join(SUMMARY_JSON)).unwrap();
        let summary = Summary::from_json(&text).unwrap();
        assert_eq!(summary, Summary::new(&rep, &evaluate(&rep)));
        assert_eq!(Summary::from_json(&summary.to_json().unwrap()).unwrap(), summary);
        assert_eq!(summary.replications[1].seed, replication_seed(cfg.base_seed, 1));
        assert!(!summary.seed_scheme.is_empty());
    }
}

#[test]
fn empty_report_emits_headers() {
    let dir = tempfile::tempdir().unwrap();
    let files = emitted(&RunReport::empty(ar2(1_000, 1)), dir.path());
    for (name, body) in &files {
        assert_eq!(rows(body), 0, "{name}");
    }
    let text = fs::read_to_string(dir.path().join(SUMMARY_JSON)).unwrap();
    assert!(Summary::from_json(&text).unwrap().replications.is_empty());
}

/// Pooled `avg_fV` equals the normalizer-weighted mean of the per-replication
/// values read back from the CSV.
#[test]
fn merged_report_is_weighted_mean_of_replications() {
    let dir = tempfile::tempdir().unwrap();
    let rep = run_experiment(&ar1(3_000, 10)).unwrap();
    emitted(&rep, dir.path());
    let mut rd = csv::Reader::from_path(dir.path().join(ASCLT_CSV)).unwrap();
    let h = rd.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    let (cn, cp, cfv, cap, cld) = (col("n"), col("p"), col("avg_fV"), col("avg_ap"), col("log_det"));
    let mut acc: BTreeMap<(u64, u32), (f64, f64, f64)> = BTreeMap::new();
    for r in rd.records() {
        let r = r.unwrap();
        let key = (r[cn].parse().unwrap(), r[cp].parse().unwrap());
        let w: f64 = r[cld].parse().unwrap();
        let e = acc.entry(key).or_default();
        e.0 += w * r[cfv].parse::<f64>().unwrap();
        e.1 += w * r[cap].parse::<f64>().unwrap();
        e.2 += w;
    }
    let mut rd = csv::Reader::from_path(dir.path().join(ASCLT_MERGED_CSV)).unwrap();
    let mut seen = 0;
    for r in rd.records() {
        let r = r.unwrap();
        let (fv, ap, w) = acc[&(r[0].parse().unwrap(), r[1].parse().unwrap())];
        let got_fv: f64 = r[3].parse().unwrap();
        let got_ap: f64 = r[6].parse().unwrap();
        assert!((got_fv - fv / w).abs() <= 1e-12 * got_fv.abs());
        assert!((got_ap - ap / w).abs() <= 1e-12 * got_ap.abs());
        seen += 1;
    }
    assert_eq!(seen, acc.len());
}

#[test]
fn dropping_a_replication_equals_merging_the_rest() {
    let rep = run_experiment(&ar1(3_000, 4)).unwrap();
    let without = rep.merge_excluding(&[2]).unwrap();
    for (i, snap) in without.iter().enumerate() {
        let parts: Vec<_> = [0, 1, 3].iter().map(|&r| &rep.replications[r].snapshots[i]).collect();
        assert_eq!(*snap, merge_snapshots(&parts).unwrap());
    }
    // merge order only moves the result by rounding
    let fwd = merge_snapshots(&rep.replications.iter().map(|r| &r.snapshots[1]).collect::<Vec<_>>()).unwrap();
    let rev = merge_snapshots(&rep.replications.iter().rev().map(|r| &r.snapshots[1]).collect::<Vec<_>>()).unwrap();
    for (a, b) in fwd.moment_reports().iter().zip(rev.moment_reports()) {
        assert!((a.avg_fv - b.avg_fv).abs() <= 1e-12 * a.avg_fv.abs());
    }
}

#[test]
fn failed_replications_are_isolated() {
    let spec = BranchingSpec {
        offspring: CountLaw::Geometric { mean: 0.8 },
        immigration: CountLaw::Poisson { mean: 4.0 },
        draw_cap: 60,
    };
    let mut cfg = ExperimentConfig::new(ModelConfig::Branching(spec), 1_000, 8, 3);
    cfg.stationary.burn_in = 0;
    cfg.stationary.samples = 100;
    let rep = run_experiment(&cfg).unwrap();
    let failed: Vec<u32> = rep.failed().map(|r| r.replication).collect();
    assert!(!failed.is_empty() && failed.len() < 8, "{failed:?}");
    for r in &rep.replications {
        if r.error.is_none() {
            assert_eq!(r.snapshots.len(), rep.checkpoints.len());
        }
    }
    assert_eq!(rep.final_merged().unwrap().pooled as usize, 8 - failed.len());
    assert!(!evaluate(&rep)[0].passed);
}

#[test]
fn invalid_config_rejected_before_running() {
    let mut cfg = ar1(500, 1);
    assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
    cfg.n_steps = 1_000;
    cfg.replications = 0;
    assert!(matches!(run_experiment(&cfg), Err(Error::InvalidConfig(_))));
}

#[test]
fn probe_rows_extend_as_a_prefix() {
    let noise = NoiseSpec::new(asclt_lab::models::NoiseFamily::Rademacher, 1.0).unwrap();
    let mk = |n| {
        let mut cfg = ExperimentConfig::new(ModelConfig::Probe { noise }, n, 1, 4);
        cfg.p_set = vec![1];
        conjecture_probe(&cfg).unwrap()
    };
    let (short, long) = (mk(100_000), mk(1_000_000));
    assert!(short.all_finite && long.all_finite);
    assert_eq!(long.rows.len(), long.run.checkpoints.len());
    assert_eq!(&long.rows[..short.rows.len()], &short.rows[..]);
    assert_eq!(long.rows.len() - short.rows.len(), 2);
}

#[test]
fn probe_on_stable_control_matches_asclt_report() {
    let cfg = ar2(20_000, 2);
    let probe = conjecture_probe(&cfg).unwrap();
    let run = run_experiment(&cfg).unwrap();
    for row in &probe.rows {
        let snap = run.replications[row.replication as usize].snapshots.iter().find(|s| s.n == row.n).unwrap();
        let m = snap.moment_report(row.p).unwrap();
        assert_eq!((row.avg_fv, row.avg_ap), (m.avg_fv, m.avg_ap));
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_asclt-lab"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"model": {"kind": "ar", "theta": [1.5], "noise": {"family": "gaussian", "sigma2": 1}}, "n_steps": 5000}"#).unwrap();
    let out = cli().args(["simulate", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let missing = cli().args(["simulate", "--config", "/nonexistent.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let ok = dir.path().join("probe.json");
    fs::write(&ok, r#"{"model": {"kind": "probe", "noise": {"family": "rademacher", "sigma2": 1}}, "n_steps": 2000}"#).unwrap();
    let out = cli()
        .args(["probe-conjecture", "--config"])
        .arg(&ok)
        .args(["--seed", "3", "--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("out").join(PROBE_CSV).exists());

    let out = cli().args(["simulate", "--config"]).arg(&ok).args(["--steps", "3000"]).env("ASCLT_LAB_SEED", "9").output().unwrap();
    // no criteria apply to the probe, so nothing can fail
    assert_eq!(out.status.code(), Some(0));
}
