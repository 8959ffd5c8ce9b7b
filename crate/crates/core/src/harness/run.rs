use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ModelConfig};
use crate::asclt::{weighted_ks, MomentAccumulator, MomentReport, ScalarTrack, WeightedHistogram};
use crate::error::{Error, Result};
use crate::estimators::{ClsState, ErrorLedger, EtaErrorTracker, LedgerReport, LsState};
use crate::linalg::{dot, GramState, SymMatrix};
use crate::models::{
    limiting_matrix_ar, stationary_matrix_estimates, ArSimulator, BranchingSimulator, BranchingSpec,
    NoiseSpec, RandomWalkProbe, RegressionStream, StationaryEstimates,
};

/// Name of the seed derivation written to the summary.
pub const SEED_SCHEME: &str =
    "replication r uses ChaCha8Rng::seed_from_u64(splitmix64(base_seed + r)), wrapping u64 arithmetic";

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn replication_seed(base_seed: u64, replication: u32) -> u64 {
    splitmix64(base_seed.wrapping_add(replication as u64))
}

/// Seeds of the two independent chains behind the stationary matrix estimates.
pub fn stationary_seeds(base_seed: u64) -> [u64; 2] {
    [splitmix64(base_seed ^ 0x5354_4154_0000_0001), splitmix64(base_seed ^ 0x5354_4154_0000_0002)]
}

/// Conditional least-squares state at a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClsSnapshot {
    pub theta_hat: [f64; 2],
    pub eta_hat: [f64; 2],
    /// `(1 / log n) Σ k^{p−1} ((η̂_k − η)ᵀ Λ̂ (η̂_k − η))^p` for the first `p`.
    pub eta_stat: Option<f64>,
    pub eta_candidate_target: f64,
}

/// Everything recorded at one checkpoint of one run (or pooled over runs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub n: u64,
    /// One accumulator per configured `p`.
    pub moments: Vec<MomentAccumulator>,
    pub ledger: Option<ErrorLedger>,
    pub hist: Option<WeightedHistogram>,
    /// `θ̂ − θ`; the mean over runs once pooled.
    pub theta_err: Vec<f64>,
    pub cls: Option<ClsSnapshot>,
    /// Number of runs pooled into this snapshot.
    pub pooled: u32,
}

impl Snapshot {
    pub fn moment_reports(&self) -> Vec<MomentReport> {
        self.moments.iter().filter_map(|m| m.report().ok()).collect()
    }

    pub fn moment_report(&self, p: u32) -> Option<MomentReport> {
        self.moments.iter().find(|m| m.p() == p).and_then(|m| m.report().ok())
    }

    pub fn ledger_report(&self) -> Option<LedgerReport> {
        self.ledger.as_ref().map(|l| l.report())
    }

    pub fn ks(&self, sigma2: f64) -> Option<f64> {
        self.hist.as_ref().and_then(|h| weighted_ks(h, sigma2).ok())
    }
}

/// Pools snapshots taken at the same checkpoint. Sums and normalizers add;
/// parameter errors and estimates are averaged.
pub fn merge_snapshots(parts: &[&Snapshot]) -> Result<Snapshot> {
    let first = parts.first().ok_or(Error::InsufficientData)?;
    if parts.iter().any(|s| s.n != first.n) {
        return Err(Error::ConfigMismatch("snapshots taken at different checkpoints".into()));
    }
    let mut out = Snapshot {
        n: first.n,
        moments: first.moments.iter().map(|m| m.empty_like()).collect(),
        ledger: first.ledger.as_ref().map(|l| l.empty_like()),
        hist: first.hist.as_ref().map(empty_hist),
        theta_err: vec![0.0; first.theta_err.len()],
        cls: None,
        pooled: 0,
    };
    let mut cls_sum: Option<([f64; 2], [f64; 2], Option<f64>, f64)> = None;
    let total: u32 = parts.iter().map(|s| s.pooled).sum();
    for s in parts {
        if s.moments.len() != out.moments.len() || s.theta_err.len() != out.theta_err.len() {
            return Err(Error::ConfigMismatch("snapshot layouts differ".into()));
        }
        for (acc, m) in out.moments.iter_mut().zip(&s.moments) {
            *acc = acc.merge(m)?;
        }
        if let (Some(acc), Some(l)) = (out.ledger.as_mut(), s.ledger.as_ref()) {
            *acc = acc.merge(l)?;
        }
        if let (Some(acc), Some(h)) = (out.hist.as_mut(), s.hist.as_ref()) {
            *acc = acc.merge(h)?;
        }
        let w = s.pooled as f64 / total as f64;
        for (acc, e) in out.theta_err.iter_mut().zip(&s.theta_err) {
            *acc += w * e;
        }
        if let Some(c) = &s.cls {
            let entry = cls_sum.get_or_insert(([0.0; 2], [0.0; 2], Some(0.0), c.eta_candidate_target));
            for i in 0..2 {
                entry.0[i] += w * c.theta_hat[i];
                entry.1[i] += w * c.eta_hat[i];
            }
            entry.2 = match (entry.2, c.eta_stat) {
                (Some(a), Some(b)) => Some(a + w * b),
                _ => None,
            };
        }
        out.pooled += s.pooled;
    }
    out.cls = cls_sum.map(|(theta_hat, eta_hat, eta_stat, eta_candidate_target)| ClsSnapshot {
        theta_hat,
        eta_hat,
        eta_stat,
        eta_candidate_target,
    });
    Ok(out)
}

fn empty_hist(h: &WeightedHistogram) -> WeightedHistogram {
    let edges = h.edges();
    WeightedHistogram::new(edges[0], *edges.last().unwrap(), h.bins()).expect("valid binning")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub replication: u32,
    pub seed: u64,
    /// Checkpoints reached, in increasing order.
    pub snapshots: Vec<Snapshot>,
    pub wall_time_s: f64,
    /// Set when the replication aborted; its snapshots are then partial and
    /// excluded from the merged report.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryPair {
    pub first: StationaryEstimates,
    pub second: StationaryEstimates,
    pub seeds: [u64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub checkpoints: Vec<u64>,
    pub replications: Vec<ReplicationReport>,
    /// Pooled over every replication that completed, one per checkpoint.
    pub merged: Vec<Snapshot>,
    pub stationary: Option<StationaryPair>,
    pub wall_time_s: f64,
}

impl RunReport {
    /// A report with no replications, as for an empty run.
    pub fn empty(config: ExperimentConfig) -> Self {
        Self {
            checkpoints: config.checkpoint_grid(),
            config,
            replications: Vec::new(),
            merged: Vec::new(),
            stationary: None,
            wall_time_s: 0.0,
        }
    }

    pub fn failed(&self) -> impl Iterator<Item = &ReplicationReport> {
        self.replications.iter().filter(|r| r.error.is_some())
    }

    pub fn final_merged(&self) -> Option<&Snapshot> {
        self.merged.last()
    }

    pub fn merged_at(&self, n: u64) -> Option<&Snapshot> {
        self.merged.iter().find(|s| s.n == n)
    }

    /// Pools the completed replications whose index is not in `exclude`.
    pub fn merge_excluding(&self, exclude: &[u32]) -> Result<Vec<Snapshot>> {
        let kept: Vec<&ReplicationReport> = self
            .replications
            .iter()
            .filter(|r| r.error.is_none() && !exclude.contains(&r.replication))
            .collect();
        merge_replications(&kept, self.checkpoints.len())
    }
}

fn merge_replications(reps: &[&ReplicationReport], n_checkpoints: usize) -> Result<Vec<Snapshot>> {
    if reps.is_empty() {
        return Ok(Vec::new());
    }
    (0..n_checkpoints)
        .map(|i| {
            let parts: Vec<&Snapshot> = reps.iter().map(|r| &r.snapshots[i]).collect();
            merge_snapshots(&parts)
        })
        .collect()
}

/// Runs every replication on the global thread pool.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let checkpoints = config.checkpoint_grid();
    let stationary = match &config.model {
        ModelConfig::Branching(spec) => Some(stationary_pair(spec, config)?),
        _ => None,
    };
    let limit = match &config.model {
        ModelConfig::Ar(spec) => Some(limiting_matrix_ar(spec)?),
        _ => None,
    };
    let replications: Vec<ReplicationReport> = (0..config.replications)
        .into_par_iter()
        .map(|r| run_replication(config, r, &checkpoints, limit.as_ref(), stationary.as_ref()))
        .collect();
    let ok: Vec<&ReplicationReport> = replications.iter().filter(|r| r.error.is_none()).collect();
    let merged = merge_replications(&ok, checkpoints.len())?;
    Ok(RunReport {
        config: config.clone(),
        checkpoints,
        replications,
        merged,
        stationary,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Runs on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(config: &ExperimentConfig, threads: usize) -> Result<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run_experiment(config))
}

fn stationary_pair(spec: &BranchingSpec, config: &ExperimentConfig) -> Result<StationaryPair> {
    let seeds = stationary_seeds(config.base_seed);
    let st = config.stationary;
    let (first, second) = rayon::join(
        || stationary_matrix_estimates(spec, st.burn_in, st.samples, seeds[0]),
        || stationary_matrix_estimates(spec, st.burn_in, st.samples, seeds[1]),
    );
    Ok(StationaryPair { first: first?, second: second?, seeds })
}

fn run_replication(
    config: &ExperimentConfig,
    r: u32,
    checkpoints: &[u64],
    limit: Option<&SymMatrix>,
    stationary: Option<&StationaryPair>,
) -> ReplicationReport {
    let start = Instant::now();
    let seed = replication_seed(config.base_seed, r);
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let result = match &config.model {
        ModelConfig::Ar(spec) => ArSimulator::new(spec.clone(), seed)
            .and_then(|sim| run_regression(sim, config, &spec.noise, limit, checkpoints, &mut snapshots)),
        ModelConfig::Probe { noise } => RandomWalkProbe::new(*noise, seed)
            .and_then(|sim| run_regression(sim, config, noise, None, checkpoints, &mut snapshots)),
        ModelConfig::Branching(spec) => {
            let lambda_hat = stationary.map(|s| s.first.lambda_hat.clone());
            run_branching(spec, seed, config, lambda_hat, checkpoints, &mut snapshots)
        }
    };
    ReplicationReport {
        replication: r,
        seed,
        snapshots,
        wall_time_s: start.elapsed().as_secs_f64(),
        error: result.err().map(|e| e.to_string()),
    }
}

fn prior(config: &ExperimentConfig) -> Result<GramState> {
    let d = config.dim();
    let s0 = match &config.prior_diag {
        Some(diag) => SymMatrix::diag(diag),
        None => SymMatrix::identity(d),
    };
    GramState::with_refresh_interval(s0, config.refresh_interval)
}

fn run_regression<S: RegressionStream>(
    mut stream: S,
    config: &ExperimentConfig,
    noise: &NoiseSpec,
    limit: Option<&SymMatrix>,
    checkpoints: &[u64],
    snapshots: &mut Vec<Snapshot>,
) -> Result<()> {
    let d = stream.dim();
    let theta: Vec<f64> = stream
        .theta()
        .ok_or_else(|| Error::InvalidConfig("regression stream without a known parameter".into()))?
        .to_vec();
    let sigma2 = noise.sigma2;
    let gram = prior(config)?;
    let prior_log_det = gram.log_det_prior();
    let s00 = gram.s().get(0, 0);
    let mut ls = LsState::with_truth(&theta, gram, limit.cloned())?;
    let mut moments = config
        .p_set
        .iter()
        .map(|&p| MomentAccumulator::new(p, d, sigma2, prior_log_det))
        .collect::<Result<Vec<_>>>()?;
    let mut scalar = if d == 1 {
        Some(ScalarTrack::new(ls.transform().expect("known parameter").m()[0], s00)?)
    } else {
        None
    };
    let mut ledger = ErrorLedger::new(&config.orders(), d, sigma2, |q| noise.even_moment(q))?;
    let mut hist = WeightedHistogram::for_sigma2(sigma2)?;
    let u: Vec<f64> = config.ks_direction.clone().unwrap_or_else(|| {
        let mut e = vec![0.0; d];
        e[0] = 1.0;
        e
    });

    let mut phi = vec![0.0; d];
    let mut next_cp = 0;
    for k in 0..config.n_steps {
        let obs = stream.next_into(&mut phi)?;
        let eps = obs.x_next - dot(&theta, &phi);
        let (point, scalar_step) = match scalar.as_mut() {
            Some(track) => {
                let st = track.step(phi[0], eps);
                (st.point, Some(st))
            }
            None => {
                let tr = ls.transform().expect("known parameter");
                let usu = tr.gram().s().bilinear_unchecked(&u, &u);
                (dot(&u, tr.m()) / usu.sqrt(), None)
            }
        };
        let step = ls.update(&phi, obs.x_next)?;
        let rec = step.record.expect("known parameter");
        for acc in moments.iter_mut() {
            acc.accumulate(&rec);
            if let Some(st) = &scalar_step {
                acc.accumulate_scalar(st);
            }
        }
        ledger.update(&step, rec.log_det - prior_log_det);
        hist.add(point, rec.f);

        if next_cp < checkpoints.len() && k + 1 == checkpoints[next_cp] {
            let theta_err = ls.theta_hat().iter().zip(&theta).map(|(a, b)| a - b).collect();
            snapshots.push(Snapshot {
                n: k + 1,
                moments: moments.clone(),
                ledger: Some(ledger.clone()),
                hist: Some(hist.clone()),
                theta_err,
                cls: None,
                pooled: 1,
            });
            next_cp += 1;
        }
    }
    Ok(())
}

fn run_branching(
    spec: &BranchingSpec,
    seed: u64,
    config: &ExperimentConfig,
    lambda_hat: Option<SymMatrix>,
    checkpoints: &[u64],
    snapshots: &mut Vec<Snapshot>,
) -> Result<()> {
    let mut sim = BranchingSimulator::new(*spec, seed)?;
    let mut cls = ClsState::new(*spec)?;
    let p = config.p_set[0];
    let mut tracker = match lambda_hat {
        Some(l) => Some(EtaErrorTracker::new(p, l, spec.eta(), spec.sigma2())?),
        None => None,
    };
    let theta = spec.theta();
    let mut next_cp = 0;
    for k in 0..config.n_steps {
        let step = sim.step()?;
        let out = cls.update(&step)?;
        if let Some(t) = tracker.as_mut() {
            t.update(out.eta_hat);
        }
        if next_cp < checkpoints.len() && k + 1 == checkpoints[next_cp] {
            let report = tracker.as_ref().and_then(|t| t.report().ok());
            snapshots.push(Snapshot {
                n: k + 1,
                moments: Vec::new(),
                ledger: None,
                hist: None,
                theta_err: vec![out.theta_hat[0] - theta[0], out.theta_hat[1] - theta[1]],
                cls: Some(ClsSnapshot {
                    theta_hat: out.theta_hat,
                    eta_hat: out.eta_hat,
                    eta_stat: report.as_ref().map(|r| r.statistic),
                    eta_candidate_target: crate::asclt::target_ell(p, 2, spec.sigma2()),
                }),
                pooled: 1,
            });
            next_cp += 1;
        }
    }
    Ok(())
}
