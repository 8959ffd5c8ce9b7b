//! Data-generating processes: noise families, stable autoregressions,
//! branching processes with immigration, and the random-walk probe design.

mod ar;
mod branching;
mod noise;
mod probe;

use std::io::Write;

pub use ar::{analyze_ar, limiting_matrix_ar, ArAnalysis, ArSimulator, ArSpec};
pub use branching::{
    conditional_variance_v, normalize_branching, stationary_matrix_estimates, BranchingSimulator,
    BranchingSpec, BranchingStep, BranchingStream, CountLaw, NormalizedStep, StationaryEstimates,
};
pub use noise::{NoiseFamily, NoiseSpec};
pub use probe::RandomWalkProbe;

use crate::error::Result;

/// What a regression stream yields alongside `Φ_n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub n: u64,
    /// `X_{n+1}`.
    pub x_next: f64,
    /// `ε_{n+1}`.
    pub eps: f64,
    /// `α_n`.
    pub alpha: f64,
}

/// A stream of `(Φ_n, X_{n+1}, ε_{n+1}, α_n)` in the model `X_{n+1} = θᵀΦ_n + ε_{n+1}`.
pub trait RegressionStream {
    fn dim(&self) -> usize;

    /// The true parameter, when known.
    fn theta(&self) -> Option<&[f64]>;

    /// Writes `Φ_n` into `phi` and returns the rest of step `n`.
    fn next_into(&mut self, phi: &mut [f64]) -> Result<Observation>;
}

/// An owned step, convenient outside hot loops.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionStep {
    pub n: u64,
    pub phi: Vec<f64>,
    pub x_next: f64,
    pub eps: f64,
    pub alpha: f64,
}

/// Pulls one owned step from any stream.
pub fn next_step<S: RegressionStream + ?Sized>(stream: &mut S) -> Result<RegressionStep> {
    let mut phi = vec![0.0; stream.dim()];
    let obs = stream.next_into(&mut phi)?;
    Ok(RegressionStep { n: obs.n, phi, x_next: obs.x_next, eps: obs.eps, alpha: obs.alpha })
}

/// Writes `n_steps` rows `n,phi_0..phi_{d-1},x_next,eps`.
pub fn write_trajectory<S, W>(stream: &mut S, n_steps: u64, out: W) -> Result<()>
where
    S: RegressionStream + ?Sized,
    W: Write,
{
    let d = stream.dim();
    let mut wtr = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string()];
    header.extend((0..d).map(|i| format!("phi_{i}")));
    header.push("x_next".into());
    header.push("eps".into());
    wtr.write_record(&header)?;
    let mut phi = vec![0.0; d];
    let mut row = Vec::with_capacity(d + 3);
    for _ in 0..n_steps {
        let obs = stream.next_into(&mut phi)?;
        row.clear();
        row.push(obs.n.to_string());
        row.extend(phi.iter().map(|v| v.to_string()));
        row.push(obs.x_next.to_string());
        row.push(obs.eps.to_string());
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
