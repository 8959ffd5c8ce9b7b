//! Pass/fail verdicts computed from a finished run.

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::run::{RunReport, Snapshot};
use crate::asclt::{gaussian_even_moment, target_ell, target_lambda};
use crate::linalg::SymMatrix;
use crate::models::StationaryEstimates;

pub const SCALAR_P1_TOL: f64 = 0.15;
pub const SCALAR_P2_TOL: f64 = 0.25;
pub const VECTOR_P1_TOL: f64 = 0.15;
pub const VECTOR_P2_TOL: f64 = 0.30;
pub const A1_SQUARED_MAX: f64 = 0.1;
pub const A1_P1_TOL: f64 = 0.15;
pub const ESTMOM_TOL: f64 = 0.20;
pub const RATIO_MEDIAN_FACTOR: f64 = 10.0;
pub const RES5_TOL: f64 = 0.30;
pub const BRANCH_MEAN_TOL: f64 = 0.02;
pub const BRANCH_VAR_TOL: f64 = 0.10;
pub const CROSS_SEED_SE: f64 = 3.0;
pub const KS_MAX: f64 = 0.1;
pub const KS_CHECKPOINTS: [u64; 3] = [10_000, 100_000, 1_000_000];
pub const IDENTITY_TOL: f64 = 1e-8;
pub const ORACLE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub criterion: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(criterion: u8, name: &str, passed: bool, detail: String) -> Self {
        Self { criterion, name: name.into(), passed, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.criterion,
            self.name,
            self.detail
        )
    }
}

pub fn rel_err(value: f64, target: f64) -> f64 {
    (value - target).abs() / target.abs()
}

fn missing(criterion: u8, name: &str, what: &str) -> Verdict {
    Verdict::new(criterion, name, false, format!("{what} not available"))
}

/// Verdicts for every criterion that applies to the run's model: the scalar
/// criteria for a first-order autoregression, the vector ones for higher
/// orders, and the estimation criterion for branching runs.
pub fn evaluate(report: &RunReport) -> Vec<Verdict> {
    let Some(last) = report.final_merged() else {
        return Vec::new();
    };
    let sigma2 = report.config.sigma2();
    match &report.config.model {
        ModelConfig::Ar(spec) if spec.dim() == 1 => vec![
            scalar_moments(last, sigma2),
            estimation_moment(report, sigma2),
            averaged_error(report),
            empirical_measure(report, sigma2),
        ],
        ModelConfig::Ar(_) => vec![vector_moments(last, sigma2), riccati_corollary(last, sigma2)],
        ModelConfig::Branching(_) => vec![branching(report)],
        ModelConfig::Probe { .. } => Vec::new(),
    }
}

/// Scalar statistic `(1/log s_n) Σ f_k (M_k²/s_{k−1})^p` against the Gaussian moments.
pub fn scalar_moments(last: &Snapshot, sigma2: f64) -> Verdict {
    const NAME: &str = "scalar ASCLT moments";
    let (Some(r1), Some(r2)) = (last.moment_report(1), last.moment_report(2)) else {
        return missing(3, NAME, "p = 1 and p = 2 reports");
    };
    let v1 = r1.avg_scalar.unwrap_or(r1.avg_fv);
    let v2 = r2.avg_scalar.unwrap_or(r2.avg_fv);
    let (t1, t2) = (gaussian_even_moment(1, sigma2), gaussian_even_moment(2, sigma2));
    let (e1, e2) = (rel_err(v1, t1), rel_err(v2, t2));
    Verdict::new(
        3,
        NAME,
        e1 <= SCALAR_P1_TOL && e2 <= SCALAR_P2_TOL,
        format!(
            "n={} runs={} p=1 {v1:.4} vs {t1} (err {e1:.3}, tol {SCALAR_P1_TOL}); p=2 {v2:.4} vs {t2} (err {e2:.3}, tol {SCALAR_P2_TOL})",
            last.n, last.pooled
        ),
    )
}

pub fn vector_moments(last: &Snapshot, sigma2: f64) -> Verdict {
    const NAME: &str = "vector ASCLT moments";
    let (Some(r1), Some(r2)) = (last.moment_report(1), last.moment_report(2)) else {
        return missing(4, NAME, "p = 1 and p = 2 reports");
    };
    let d = r1.d;
    let errs = [
        (rel_err(r1.avg_fv, target_ell(1, d, sigma2)), VECTOR_P1_TOL),
        (rel_err(r1.avg_ap, target_lambda(1, d, sigma2)), VECTOR_P1_TOL),
        (rel_err(r2.avg_fv, target_ell(2, d, sigma2)), VECTOR_P2_TOL),
        (rel_err(r2.avg_ap, target_lambda(2, d, sigma2)), VECTOR_P2_TOL),
    ];
    Verdict::new(
        4,
        NAME,
        errs.iter().all(|(e, t)| e <= t),
        format!(
            "n={} runs={} p=1 fV {:.4}/{} ap {:.4}/{}; p=2 fV {:.4}/{} ap {:.4}/{}; rel errs {:.3} {:.3} {:.3} {:.3}",
            last.n,
            last.pooled,
            r1.avg_fv,
            r1.target_ell,
            r1.avg_ap,
            r1.target_lambda,
            r2.avg_fv,
            r2.target_ell,
            r2.avg_ap,
            r2.target_lambda,
            errs[0].0,
            errs[1].0,
            errs[2].0,
            errs[3].0
        ),
    )
}

pub fn riccati_corollary(last: &Snapshot, sigma2: f64) -> Verdict {
    const NAME: &str = "normalized sums of a(1)^p";
    let (Some(r1), Some(r2)) = (last.moment_report(1), last.moment_report(2)) else {
        return missing(5, NAME, "p = 1 and p = 2 reports");
    };
    let e1 = rel_err(r1.avg_a1_pow, sigma2);
    Verdict::new(
        5,
        NAME,
        r2.avg_a1_pow <= A1_SQUARED_MAX && e1 <= A1_P1_TOL,
        format!(
            "n={} p=2 {:.4} (max {A1_SQUARED_MAX}); p=1 {:.4} vs {sigma2} (err {e1:.3}, tol {A1_P1_TOL})",
            last.n, r2.avg_a1_pow, r1.avg_a1_pow
        ),
    )
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

pub fn estimation_moment(report: &RunReport, sigma2: f64) -> Verdict {
    const NAME: &str = "moment estimation from residuals";
    let Some((n, last)) = report.final_merged().and_then(|s| Some((s.n, s.ledger_report()?))) else {
        return missing(6, NAME, "error ledger");
    };
    let Some(estmom) = last.order(1).and_then(|o| o.estmom) else {
        return missing(6, NAME, "n(Γ−Δ)/log d_n");
    };
    let mut ratios: Vec<f64> = report
        .merged
        .iter()
        .filter_map(|s| s.ledger_report()?.order(2)?.estmoment_ratio)
        .collect();
    if ratios.is_empty() {
        return missing(6, NAME, "order-2 ratio sequence");
    }
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let med = median(&mut ratios);
    let e = rel_err(estmom, sigma2);
    Verdict::new(
        6,
        NAME,
        e <= ESTMOM_TOL && max <= RATIO_MEDIAN_FACTOR * med,
        format!(
            "n={} n(Γ−Δ)/log d_n {estmom:.4} vs {sigma2} (err {e:.3}, tol {ESTMOM_TOL}); order-2 ratio max {max:.4e} median {med:.4e} over {} checkpoints (factor {:.2}, limit {RATIO_MEDIAN_FACTOR})",
            n,
            ratios.len(),
            max / med
        ),
    )
}

pub fn averaged_error(report: &RunReport) -> Verdict {
    const NAME: &str = "L-weighted cumulative estimation error";
    let series: Vec<(u64, f64, f64)> = report
        .merged
        .iter()
        .filter_map(|s| {
            let r = s.ledger_report()?;
            let o = r.order(1)?;
            Some((s.n, o.res5?, o.target_ell))
        })
        .collect();
    let (Some(first), Some(last)) = (series.first(), series.last()) else {
        return missing(7, NAME, "res5 series");
    };
    let e_last = rel_err(last.1, last.2);
    let e_first = rel_err(first.1, first.2);
    let trend = e_last <= e_first;
    Verdict::new(
        7,
        NAME,
        e_last <= RES5_TOL && trend,
        format!(
            "n={} value {:.4} vs {} (err {e_last:.3}, tol {RES5_TOL}); err at n={} was {e_first:.3}",
            last.0, last.1, last.2, first.0
        ),
    )
}

pub fn empirical_measure(report: &RunReport, sigma2: f64) -> Verdict {
    const NAME: &str = "weighted KS of the empirical measure";
    let ks: Option<Vec<f64>> = KS_CHECKPOINTS
        .iter()
        .map(|&n| report.merged_at(n).and_then(|s| s.ks(sigma2)))
        .collect();
    let Some(ks) = ks else {
        return missing(9, NAME, "KS at checkpoints 1e4, 1e5, 1e6");
    };
    let decreasing = ks.windows(2).all(|w| w[1] < w[0]);
    Verdict::new(
        9,
        NAME,
        ks[2] <= KS_MAX && decreasing,
        format!("KS at 1e4, 1e5, 1e6: {:.4}, {:.4}, {:.4} (max {KS_MAX} at 1e6, strictly decreasing)", ks[0], ks[1], ks[2]),
    )
}

fn is_positive_definite(m: &SymMatrix) -> bool {
    m.cholesky().is_ok()
}

/// Largest `|a − b| / sqrt(se_a² + se_b²)` over the distinct entries of both matrices.
pub fn cross_seed_z(a: &StationaryEstimates, b: &StationaryEstimates) -> f64 {
    let mut worst = 0.0f64;
    for (ma, sa, mb, sb) in [
        (&a.l_hat, &a.l_se, &b.l_hat, &b.l_se),
        (&a.lambda_hat, &a.lambda_se, &b.lambda_hat, &b.lambda_se),
    ] {
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let se = (sa.get(i, j).powi(2) + sb.get(i, j).powi(2)).sqrt();
            let diff = (ma.get(i, j) - mb.get(i, j)).abs();
            worst = worst.max(if se > 0.0 { diff / se } else if diff > 0.0 { f64::INFINITY } else { 0.0 });
        }
    }
    worst
}

pub fn branching(report: &RunReport) -> Verdict {
    const NAME: &str = "branching estimation";
    let ModelConfig::Branching(spec) = &report.config.model else {
        return missing(8, NAME, "branching model");
    };
    let theta = spec.theta();
    let eta = spec.eta();
    let mut worst_mean = 0.0f64;
    let mut worst_var = 0.0f64;
    let mut runs = 0;
    for r in &report.replications {
        if r.error.is_some() {
            return Verdict::new(8, NAME, false, format!("replication {} failed", r.replication));
        }
        let Some(cls) = r.snapshots.last().and_then(|s| s.cls.as_ref()) else {
            return missing(8, NAME, "final estimates of every replication");
        };
        runs += 1;
        for i in 0..2 {
            worst_mean = worst_mean.max(rel_err(cls.theta_hat[i], theta[i]));
            worst_var = worst_var.max(rel_err(cls.eta_hat[i], eta[i]));
        }
    }
    let Some(st) = &report.stationary else {
        return missing(8, NAME, "stationary matrix estimates");
    };
    let pd = [&st.first.l_hat, &st.first.lambda_hat, &st.second.l_hat, &st.second.lambda_hat]
        .iter()
        .all(|m| is_positive_definite(m));
    let z = cross_seed_z(&st.first, &st.second);
    let n = report.final_merged().map_or(0, |s| s.n);
    Verdict::new(
        8,
        NAME,
        runs > 0 && worst_mean <= BRANCH_MEAN_TOL && worst_var <= BRANCH_VAR_TOL && pd && z <= CROSS_SEED_SE,
        format!(
            "n={n} runs={runs} worst (m, λ) err {worst_mean:.4} (tol {BRANCH_MEAN_TOL}); worst (σ², b²) err {worst_var:.4} (tol {BRANCH_VAR_TOL}); positive definite {pd}; cross-seed max z {z:.2} (limit {CROSS_SEED_SE})"
        ),
    )
}
