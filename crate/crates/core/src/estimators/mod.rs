//! Least squares, cumulative error functionals, and conditional least squares.

mod cls;
mod ledger;
mod ls;

pub use cls::{eta_error_report, ClsState, ClsStep, EtaErrorReport, EtaErrorTracker};
pub use ledger::{ErrorLedger, LedgerReport, OrderReport};
pub use ls::{LsState, LsStep};
