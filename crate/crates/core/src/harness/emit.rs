//! CSV tables and the JSON summary of a run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::acceptance::Verdict;
use super::config::ExperimentConfig;
use super::probe::probe_rows;
use super::run::{ClsSnapshot, RunReport, Snapshot, StationaryPair, SEED_SCHEME};
use crate::asclt::MomentReport;
use crate::error::Result;
use crate::estimators::LedgerReport;

pub const ASCLT_CSV: &str = "asclt.csv";
pub const ASCLT_MERGED_CSV: &str = "asclt_merged.csv";
pub const ESTIMATION_CSV: &str = "estimation.csv";
pub const PREDICTION_CSV: &str = "prediction.csv";
pub const BRANCHING_CSV: &str = "branching.csv";
pub const PROBE_CSV: &str = "probe.csv";
pub const SUMMARY_JSON: &str = "summary.json";

pub const CSV_FILES: [&str; 6] =
    [ASCLT_CSV, ASCLT_MERGED_CSV, ESTIMATION_CSV, PREDICTION_CSV, BRANCHING_CSV, PROBE_CSV];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication: u32,
    pub seed: u64,
    pub wall_time_s: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub seed_scheme: String,
    pub base_seed: u64,
    pub checkpoints: Vec<u64>,
    pub replications: Vec<ReplicationSummary>,
    pub final_n: Option<u64>,
    pub final_moments: Vec<MomentReport>,
    pub final_ledger: Option<LedgerReport>,
    pub final_ks: Option<f64>,
    pub final_cls: Option<ClsSnapshot>,
    pub stationary: Option<StationaryPair>,
    pub verdicts: Vec<Verdict>,
    pub all_passed: bool,
    pub wall_time_s: f64,
}

impl Summary {
    pub fn new(report: &RunReport, verdicts: &[Verdict]) -> Self {
        let last = report.final_merged();
        let sigma2 = report.config.sigma2();
        Self {
            config: report.config.clone(),
            seed_scheme: SEED_SCHEME.into(),
            base_seed: report.config.base_seed,
            checkpoints: report.checkpoints.clone(),
            replications: report
                .replications
                .iter()
                .map(|r| ReplicationSummary {
                    replication: r.replication,
                    seed: r.seed,
                    wall_time_s: r.wall_time_s,
                    error: r.error.clone(),
                })
                .collect(),
            final_n: last.map(|s| s.n),
            final_moments: last.map(Snapshot::moment_reports).unwrap_or_default(),
            final_ledger: last.and_then(Snapshot::ledger_report),
            final_ks: last.and_then(|s| s.ks(sigma2)),
            final_cls: last.and_then(|s| s.cls.clone()),
            stationary: report.stationary.clone(),
            verdicts: verdicts.to_vec(),
            all_passed: verdicts.iter().all(|v| v.passed),
            wall_time_s: report.wall_time_s,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn asclt_header(leading: &[&str]) -> Vec<String> {
    leading
        .iter()
        .chain(&["n", "p", "d", "avg_fV", "target_ell", "rel_err_ell", "avg_ap", "target_lambda", "rel_err_lambda", "ks"])
        .map(|s| s.to_string())
        .collect()
}

fn asclt_fields(n: u64, m: &MomentReport, ks: Option<f64>) -> Vec<String> {
    vec![
        n.to_string(),
        m.p.to_string(),
        m.d.to_string(),
        num(m.avg_fv),
        num(m.target_ell),
        num(m.rel_err_ell),
        num(m.avg_ap),
        num(m.target_lambda),
        num(m.rel_err_lambda),
        opt(ks),
    ]
}

/// Per-replication moment table with a leading replication column and
/// trailing columns for the `a(1)^p` average, the scalar statistic and the
/// normalizer `log d_n − log det S0`.
pub fn write_asclt<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = asclt_header(&["replication"]);
    header.extend(["avg_a1_pow".into(), "avg_scalar".into(), "log_det".into()]);
    w.write_record(&header)?;
    let sigma2 = report.config.sigma2();
    for rep in &report.replications {
        for snap in &rep.snapshots {
            let ks = snap.ks(sigma2);
            for m in snap.moment_reports() {
                let mut row = vec![rep.replication.to_string()];
                row.extend(asclt_fields(snap.n, &m, ks));
                row.push(num(m.avg_a1_pow));
                row.push(opt(m.avg_scalar));
                row.push(num(m.log_det));
                w.write_record(&row)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Moment table of the pooled report.
pub fn write_asclt_merged<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(asclt_header(&[]))?;
    let sigma2 = report.config.sigma2();
    for snap in &report.merged {
        let ks = snap.ks(sigma2);
        for m in snap.moment_reports() {
            w.write_record(asclt_fields(snap.n, &m, ks))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_estimation<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = report.config.dim();
    let mut header = vec!["replication".to_string(), "n".into()];
    header.extend((0..d).map(|i| format!("theta_err_{i}")));
    for p in &report.config.p_set {
        header.push(format!("G_{p}"));
        header.push(format!("res5_{p}"));
        header.push(format!("cvmoy_{p}"));
    }
    w.write_record(&header)?;
    for rep in &report.replications {
        for snap in &rep.snapshots {
            let ledger = snap.ledger_report();
            let mut row = vec![rep.replication.to_string(), snap.n.to_string()];
            row.extend(snap.theta_err.iter().map(|&e| num(e)));
            for &p in &report.config.p_set {
                let o = ledger.as_ref().and_then(|l| l.order(p));
                row.push(opt(o.and_then(|o| o.g_over_log_n)));
                row.push(opt(o.and_then(|o| o.res5)));
                row.push(opt(o.and_then(|o| o.cvmoy)));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_prediction<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["replication".to_string(), "n".into()];
    for q in &report.config.q_set {
        for col in ["C", "Gamma", "Delta", "estmom", "estmoment_ratio", "pi_avg"] {
            header.push(match col {
                "Gamma" | "Delta" => format!("{col}_{}", 2 * q),
                _ => format!("{col}_{q}"),
            });
        }
    }
    w.write_record(&header)?;
    for rep in &report.replications {
        for snap in &rep.snapshots {
            let Some(ledger) = snap.ledger_report() else { continue };
            let mut row = vec![rep.replication.to_string(), snap.n.to_string()];
            for &q in &report.config.q_set {
                let o = ledger.order(q);
                let gamma = o.and_then(|o| o.c_over_n);
                row.push(opt(gamma.map(|g| g * ledger.n as f64)));
                row.push(opt(gamma));
                row.push(opt(o.and_then(|o| o.delta)));
                row.push(opt(o.and_then(|o| o.estmom)));
                row.push(opt(o.and_then(|o| o.estmoment_ratio)));
                row.push(opt(o.and_then(|o| o.pi_avg)));
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_branching<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replication", "n", "m_hat", "lambda_hat", "sigma2_hat", "b2_hat", "eta_stat"])?;
    for rep in &report.replications {
        for snap in &rep.snapshots {
            let Some(c) = &snap.cls else { continue };
            w.write_record([
                rep.replication.to_string(),
                snap.n.to_string(),
                num(c.theta_hat[0]),
                num(c.theta_hat[1]),
                num(c.eta_hat[0]),
                num(c.eta_hat[1]),
                opt(c.eta_stat),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_probe<W: Write>(report: &RunReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replication", "n", "p", "avg_fV", "avg_ap", "max_avg_fV", "max_avg_ap"])?;
    for r in probe_rows(report) {
        w.write_record([
            r.replication.to_string(),
            r.n.to_string(),
            r.p.to_string(),
            num(r.avg_fv),
            num(r.avg_ap),
            num(r.max_avg_fv),
            num(r.max_avg_ap),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes every CSV table and `summary.json` into `dir`, creating it if
/// needed, and returns the paths written.
pub fn emit_reports(report: &RunReport, verdicts: &[Verdict], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    type Writer = fn(&RunReport, fs::File) -> Result<()>;
    let tables: [(&str, Writer); 6] = [
        (ASCLT_CSV, write_asclt),
        (ASCLT_MERGED_CSV, write_asclt_merged),
        (ESTIMATION_CSV, write_estimation),
        (PREDICTION_CSV, write_prediction),
        (BRANCHING_CSV, write_branching),
        (PROBE_CSV, write_probe),
    ];
    let mut paths = Vec::new();
    for (name, write) in tables {
        let path = dir.join(name);
        write(report, fs::File::create(&path)?)?;
        paths.push(path);
    }
    let path = dir.join(SUMMARY_JSON);
    fs::write(&path, Summary::new(report, verdicts).to_json()?)?;
    paths.push(path);
    Ok(paths)
}

/// Fixed-width moment convergence table of the pooled report.
pub fn moment_table(report: &RunReport) -> String {
    let sigma2 = report.config.sigma2();
    let mut s = format!(
        "{:>9} {:>2} {:>12} {:>10} {:>8} {:>12} {:>10} {:>8} {:>8}\n",
        "n", "p", "avg_fV", "ell", "err", "avg_ap", "lambda", "err", "ks"
    );
    for snap in &report.merged {
        let ks = snap.ks(sigma2).map_or("-".to_string(), |k| format!("{k:.4}"));
        for m in snap.moment_reports() {
            s += &format!(
                "{:>9} {:>2} {:>12.5} {:>10} {:>8.4} {:>12.5} {:>10} {:>8.4} {:>8}\n",
                snap.n, m.p, m.avg_fv, m.target_ell, m.rel_err_ell, m.avg_ap, m.target_lambda, m.rel_err_lambda, ks
            );
        }
    }
    s
}
