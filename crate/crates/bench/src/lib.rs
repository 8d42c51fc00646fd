//! Shared fixtures for the benchmarks.

use fblrelay_core::{McConfig, Scheme, SystemConfig};

/// Default two-antenna, three-relay link at the given average SNR.
pub fn link(scheme: Scheme, snr_db: f64) -> SystemConfig {
    SystemConfig { scheme, avg_snr_db: snr_db, ..SystemConfig::default() }
}

/// Small Monte Carlo budget so one iteration stays in the millisecond range.
pub fn mc_config(trials: u64) -> McConfig {
    McConfig { trials, seed: 42, ..McConfig::default() }
}
