//! Seeded, replicated experiments: configuration, execution, pooling,
//! verdicts and report files.

pub mod acceptance;
pub mod config;
pub mod emit;
pub mod probe;
pub mod run;
pub mod verify;

pub use acceptance::{evaluate, Verdict};
pub use config::{geometric_grid, ExperimentConfig, ModelConfig, StationaryConfig, MIN_STEPS};
pub use emit::{emit_reports, moment_table, Summary};
pub use probe::{conjecture_probe, probe_rows, ProbeReport, ProbeRow};
pub use run::{
    merge_snapshots, replication_seed, run_experiment, run_experiment_with_threads, splitmix64, stationary_seeds,
    ReplicationReport, RunReport, Snapshot, SEED_SCHEME,
};
pub use verify::{identity_suite, identity_verdict, oracle_suite, oracle_verdict, SuiteReport};
