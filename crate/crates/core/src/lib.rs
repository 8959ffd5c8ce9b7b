//! Almost-sure central limit theorems for vector martingale transforms.
//!
//! The building blocks:
//!
//! - [`linalg`]: symmetric matrices, Cholesky, and the regularized Gram state
//!   `S_n = S0 + Σ Φ_k Φ_kᵀ` with Sherman–Morrison updates.
//! - [`martingale`]: the transform `M_n`, per-step quantities `f, V, g, h, a(1)`.
//! - [`asclt`]: log-averaged moment statistics, their limits, and the weighted KS distance.
//! - [`models`]: autoregressions, branching processes with immigration, and a random-walk probe.
//! - [`estimators`]: least squares, its error ledger, and conditional least squares.
//! - [`harness`]: replicated experiments, CSV/JSON output, verification suites.
//!
//! See `examples/` for one runnable program per capability.

pub mod asclt;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod martingale;
pub mod models;

pub use error::{Error, Result};
pub use linalg::{Cholesky, GramState, SymMatrix};
pub use martingale::{LimitDiagnostics, LimitMatrix, StepRecord, TransformState};
