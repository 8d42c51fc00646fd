//! Block error rate, latency and throughput of multihop MIMO
//! decode-and-forward relaying with short packets.
//!
//! Each hop uses transmit antenna selection with either maximum ratio
//! combining or selection combining at the receiver. The crate provides
//! closed-form and asymptotic BLER analysis, a Monte Carlo simulator for
//! cross-validation, retransmission-aware latency and throughput, and the
//! sweep machinery behind the `fblrelay` command-line tool.

pub mod analytic;
pub mod asymptotic;
pub mod error;
mod exact_sum;
pub mod experiments;
pub mod fbl;
pub mod latency;
pub mod model;
pub mod montecarlo;
pub mod quadrature;
pub mod special;

pub use analytic::{bler_report, BlerMethod, BlerReport, HopBler, Integrand};
pub use asymptotic::{asymptotic_report, AsymptoticReport};
pub use error::{Error, Result};
pub use experiments::{run_figure, run_sweep, Figure, FigureOutput, Output, Overrides, Resolved, SweepRow, SweepSpec, SweepVariable};
pub use fbl::{build_fbl_params, FblParams};
pub use latency::{GridOptimum, LatencyThroughputReport, Objective, RetxConfig};
pub use montecarlo::{Estimator, McConfig, McEstimate};
pub use model::{build_hop_budgets, coding_rate, HopBudget, Scheme, SystemConfig};
