//! Boundedness probe for designs whose Gram eigenvalues grow at different speeds.

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelConfig};
use super::run::{run_experiment, RunReport};
use crate::error::{Error, Result};

/// The two log-averaged statistics of one replication at one checkpoint,
/// together with their running maxima over the checkpoints seen so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub replication: u32,
    pub n: u64,
    pub p: u32,
    #[serde(rename = "avg_fV")]
    pub avg_fv: f64,
    pub avg_ap: f64,
    #[serde(rename = "max_avg_fV")]
    pub max_avg_fv: f64,
    pub max_avg_ap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub run: RunReport,
    pub rows: Vec<ProbeRow>,
    /// Whether every emitted statistic is finite. This is the only thing the
    /// probe asserts; there is no pass/fail on boundedness itself.
    pub all_finite: bool,
}

/// Rows ordered by replication, then checkpoint, then `p`.
pub fn probe_rows(report: &RunReport) -> Vec<ProbeRow> {
    let mut rows = Vec::new();
    for rep in &report.replications {
        let mut maxima: Vec<(u32, f64, f64)> = Vec::new();
        for snap in &rep.snapshots {
            for m in snap.moment_reports() {
                let slot = match maxima.iter_mut().find(|e| e.0 == m.p) {
                    Some(s) => s,
                    None => {
                        maxima.push((m.p, f64::NEG_INFINITY, f64::NEG_INFINITY));
                        maxima.last_mut().unwrap()
                    }
                };
                slot.1 = slot.1.max(m.avg_fv);
                slot.2 = slot.2.max(m.avg_ap);
                rows.push(ProbeRow {
                    replication: rep.replication,
                    n: snap.n,
                    p: m.p,
                    avg_fv: m.avg_fv,
                    avg_ap: m.avg_ap,
                    max_avg_fv: slot.1,
                    max_avg_ap: slot.2,
                });
            }
        }
    }
    rows
}

/// Runs a regression model (normally the random-walk probe; an
/// autoregression works as a control) and extracts the probe statistics.
pub fn conjecture_probe(config: &ExperimentConfig) -> Result<ProbeReport> {
    if matches!(config.model, ModelConfig::Branching(_)) {
        return Err(Error::InvalidConfig("the probe needs a regression model".into()));
    }
    let run = run_experiment(config)?;
    let rows = probe_rows(&run);
    let all_finite = rows.iter().all(|r| r.avg_fv.is_finite() && r.avg_ap.is_finite());
    Ok(ProbeReport { run, rows, all_finite })
}
