use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DEFAULT_REFRESH_INTERVAL;
use crate::models::{ArSpec, BranchingSpec, NoiseSpec};

pub const MIN_STEPS: u64 = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Ar(ArSpec),
    Branching(BranchingSpec),
    /// `Φ_n = (1, W_n)` with a Rademacher random walk `W`.
    Probe { noise: NoiseSpec },
}

/// Chain length used for the stationary matrix estimates of a branching model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryConfig {
    pub burn_in: u64,
    pub samples: u64,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self { burn_in: 1_000, samples: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelConfig,
    #[serde(default = "default_orders")]
    pub p_set: Vec<u32>,
    #[serde(default = "default_orders")]
    pub q_set: Vec<u32>,
    pub n_steps: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub base_seed: u64,
    /// Step counts at which reports are taken; defaults to `1e3, 3e3, 1e4, …`
    /// up to `n_steps`, always ending at `n_steps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default = "default_refresh")]
    pub refresh_interval: usize,
    /// Diagonal of `S0`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_diag: Option<Vec<f64>>,
    /// Unit direction for the one-dimensional empirical-measure diagnostic; `e₁` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks_direction: Option<Vec<f64>>,
    #[serde(default)]
    pub stationary: StationaryConfig,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_orders() -> Vec<u32> {
    vec![1, 2]
}

fn default_replications() -> u32 {
    1
}

fn default_refresh() -> usize {
    DEFAULT_REFRESH_INTERVAL
}

/// `1e3, 3e3, 1e4, 3e4, …` below `n_steps`, then `n_steps`.
pub fn geometric_grid(n_steps: u64) -> Vec<u64> {
    let mut grid = Vec::new();
    let mut decade = 1_000u64;
    'outer: loop {
        for mult in [1, 3] {
            let v = decade * mult;
            if v >= n_steps {
                break 'outer;
            }
            grid.push(v);
        }
        decade *= 10;
    }
    grid.push(n_steps);
    grid
}

impl ExperimentConfig {
    pub fn new(model: ModelConfig, n_steps: u64, replications: u32, base_seed: u64) -> Self {
        Self {
            name: default_name(),
            model,
            p_set: default_orders(),
            q_set: default_orders(),
            n_steps,
            replications,
            base_seed,
            checkpoints: None,
            out_dir: None,
            refresh_interval: default_refresh(),
            prior_diag: None,
            ks_direction: None,
            stationary: StationaryConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("cannot parse configuration: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dim(&self) -> usize {
        match &self.model {
            ModelConfig::Ar(spec) => spec.dim(),
            ModelConfig::Branching(_) | ModelConfig::Probe { .. } => 2,
        }
    }

    /// The variance entering `ℓ(p)` and `λ(p)`.
    pub fn sigma2(&self) -> f64 {
        match &self.model {
            ModelConfig::Ar(spec) => spec.noise.sigma2,
            ModelConfig::Branching(spec) => spec.sigma2(),
            ModelConfig::Probe { noise } => noise.sigma2,
        }
    }

    pub fn checkpoint_grid(&self) -> Vec<u64> {
        self.checkpoints.clone().unwrap_or_else(|| geometric_grid(self.n_steps))
    }

    /// Every order appearing in either the `p` or the `q` set.
    pub fn orders(&self) -> Vec<u32> {
        let mut o: Vec<u32> = self.p_set.iter().chain(&self.q_set).copied().collect();
        o.sort_unstable();
        o.dedup();
        o
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_steps < MIN_STEPS {
            return bad(format!("n_steps must be at least {MIN_STEPS}, got {}", self.n_steps));
        }
        if self.replications < 1 {
            return bad("replications must be at least 1".into());
        }
        if self.p_set.is_empty() || self.p_set.contains(&0) || self.q_set.contains(&0) {
            return bad("moment orders must be positive and p_set non-empty".into());
        }
        if self.refresh_interval == 0 {
            return bad("refresh_interval must be positive".into());
        }
        match &self.model {
            ModelConfig::Ar(spec) => spec.validate()?,
            ModelConfig::Branching(spec) => {
                spec.validate()?;
                if self.stationary.samples < 100 {
                    return bad("stationary.samples must be at least 100".into());
                }
            }
            ModelConfig::Probe { noise } => noise.validate()?,
        }
        if let Some(cp) = &self.checkpoints {
            if cp.is_empty() || cp.windows(2).any(|w| w[0] >= w[1]) {
                return bad("checkpoints must be strictly increasing and non-empty".into());
            }
            if cp[0] == 0 || *cp.last().unwrap() > self.n_steps {
                return bad("checkpoints must lie in 1..=n_steps".into());
            }
        }
        let d = self.dim();
        if let Some(diag) = &self.prior_diag {
            if diag.len() != d || diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return bad(format!("prior_diag must hold {d} positive entries"));
            }
        }
        if let Some(u) = &self.ks_direction {
            let norm: f64 = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if u.len() != d || !((norm - 1.0).abs() < 1e-9) {
                return bad(format!("ks_direction must be a unit vector of length {d}"));
            }
        }
        Ok(())
    }
}
