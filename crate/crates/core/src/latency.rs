//! Retransmission-aware end-to-end latency and throughput, and grid
//! optimizers over blocklength and relay count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{bler_report, BlerReport};
use crate::error::{Error, Result};
use crate::model::SystemConfig;

/// Retransmission policy and processing delays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetxConfig {
    /// Maximum number of retransmissions `L`; zero means single shot.
    pub max_retx: u32,
    /// Per-hop feedback delay in channel uses.
    pub feedback_delay: u32,
    /// Linear decoding delay `D(beta) = alpha * beta`.
    pub decode_delay_factor: f64,
    pub cu_duration_us: f64,
}

impl Default for RetxConfig {
    fn default() -> Self {
        RetxConfig {
            max_retx: 20,
            feedback_delay: 40,
            decode_delay_factor: 2.0,
            cu_duration_us: 3.0,
        }
    }
}

impl RetxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.decode_delay_factor.is_finite() && self.decode_delay_factor >= 0.0) {
            return Err(Error::domain("decode_delay_factor", "must be finite and non-negative"));
        }
        if !(self.cu_duration_us.is_finite() && self.cu_duration_us > 0.0) {
            return Err(Error::domain("cu_duration_us", "must be finite and positive"));
        }
        Ok(())
    }

    /// Decoding delay in channel uses for a block of `blocklength` CUs.
    pub fn decode_delay(&self, blocklength: u32) -> f64 {
        self.decode_delay_factor * f64::from(blocklength)
    }

    pub fn cu_to_ms(&self, cu: f64) -> f64 {
        cu * self.cu_duration_us / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyThroughputReport {
    /// Latency of an end-to-end success, in CUs.
    pub t_s: f64,
    /// Average latency of an end-to-end failure, in CUs.
    pub t_f: f64,
    pub e2e_bler: f64,
    pub latency_cu: f64,
    pub latency_ms: f64,
    /// Bits per channel use.
    pub throughput: f64,
}

/// `(K + 1)(beta + D(beta))`.
pub fn success_latency(cfg: &SystemConfig, retx: &RetxConfig) -> f64 {
    let beta = cfg.blocklength;
    cfg.hops() as f64 * (f64::from(beta) + retx.decode_delay(beta))
}

/// `(beta + D(beta) + F)(eps_1 + Σ_{k≥2} k eps_k Π_{m=2}^{k} (1 - eps_{m-1}))`.
pub fn failure_latency(per_hop_bler: &[f64], cfg: &SystemConfig, retx: &RetxConfig) -> Result<f64> {
    if let Some(bad) = per_hop_bler.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain("per_hop_bler", format!("BLER {bad} outside [0, 1]")));
    }
    let beta = cfg.blocklength;
    let per_attempt = f64::from(beta) + retx.decode_delay(beta) + f64::from(retx.feedback_delay);
    let mut survive = 1.0;
    let mut weighted = 0.0;
    for (k, eps) in per_hop_bler.iter().enumerate() {
        weighted += (k + 1) as f64 * eps * survive;
        survive *= 1.0 - eps;
    }
    Ok(per_attempt * weighted)
}

fn check_probability(e2e_bler: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&e2e_bler) {
        return Err(Error::domain("e2e_bler", format!("{e2e_bler} outside [0, 1]")));
    }
    Ok(())
}

/// Expected latency in CUs with up to `L` retransmissions:
/// `(1 - eps)/(1 - eps^{L+1}) Σ_{r=0}^{L} eps^r (r T_F + T_S)`.
///
/// Since `(1 - eps)/(1 - eps^{L+1}) = 1/Σ eps^r`, this is evaluated as
/// `T_S + T_F Σ r eps^r / Σ eps^r`, which is finite at `eps = 1` (where it
/// equals the limit `T_S + L T_F / 2`).
pub fn e2e_latency(e2e_bler: f64, t_s: f64, t_f: f64, retx: &RetxConfig) -> Result<f64> {
    check_probability(e2e_bler)?;
    let mut power = 1.0;
    let mut norm = 0.0;
    let mut weighted = 0.0;
    for r in 0..=retx.max_retx {
        norm += power;
        weighted += f64::from(r) * power;
        power *= e2e_bler;
    }
    Ok(t_s + t_f * weighted / norm)
}

/// Delivered information bits per channel use.
pub fn e2e_throughput(e2e_bler: f64, latency: f64, t_f: f64, retx: &RetxConfig, info_bits: u32) -> Result<f64> {
    check_probability(e2e_bler)?;
    let all_fail = e2e_bler.powi(retx.max_retx as i32 + 1);
    let delivered = 1.0 - all_fail;
    let denom = latency * delivered + f64::from(retx.max_retx + 1) * t_f * all_fail;
    if !(denom > 0.0) {
        return Err(Error::range("e2e throughput", format!("zero denominator (latency {latency}, T_F {t_f})")));
    }
    Ok(f64::from(info_bits) * delivered / denom)
}

/// Latency and throughput from an existing BLER analysis.
pub fn latency_report(bler: &BlerReport, retx: &RetxConfig) -> Result<LatencyThroughputReport> {
    retx.validate()?;
    let cfg = &bler.config;
    let per_hop: Vec<f64> = bler.per_hop.iter().map(|h| h.value).collect();
    let t_s = success_latency(cfg, retx);
    let t_f = failure_latency(&per_hop, cfg, retx)?;
    let latency_cu = e2e_latency(bler.e2e, t_s, t_f, retx)?;
    let throughput = e2e_throughput(bler.e2e, latency_cu, t_f, retx, cfg.info_bits)?;
    Ok(LatencyThroughputReport {
        t_s,
        t_f,
        e2e_bler: bler.e2e,
        latency_cu,
        latency_ms: retx.cu_to_ms(latency_cu),
        throughput,
    })
}

/// Closed-form BLER followed by latency and throughput.
pub fn evaluate(cfg: &SystemConfig, retx: &RetxConfig) -> Result<LatencyThroughputReport> {
    latency_report(&bler_report(cfg)?, retx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    MinLatency,
    MaxThroughput,
}

impl Objective {
    fn better(self, candidate: &LatencyThroughputReport, incumbent: &LatencyThroughputReport) -> bool {
        match self {
            Objective::MinLatency => candidate.latency_cu < incumbent.latency_cu,
            Objective::MaxThroughput => candidate.throughput > incumbent.throughput,
        }
    }
}

/// Result of a grid optimization: the winning grid value and the full sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub best: u32,
    pub report: LatencyThroughputReport,
    pub sweep: Vec<(u32, LatencyThroughputReport)>,
}

fn optimize_grid<F>(grid: &[u32], objective: Objective, configure: F, retx: &RetxConfig) -> Result<GridOptimum>
where
    F: Fn(u32) -> SystemConfig + Sync,
{
    if grid.is_empty() {
        return Err(Error::domain("grid", "optimization grid is empty"));
    }
    let mut points = grid.to_vec();
    points.sort_unstable();
    points.dedup();
    let sweep = points
        .par_iter()
        .map(|&v| evaluate(&configure(v), retx).map(|r| (v, r)))
        .collect::<Result<Vec<_>>>()?;
    // Strict improvement only, so ties keep the smaller grid value.
    let (best, report) = sweep
        .iter()
        .skip(1)
        .fold(sweep[0], |acc, cur| if objective.better(&cur.1, &acc.1) { *cur } else { acc });
    Ok(GridOptimum { best, report, sweep })
}

/// Exhaustive search over blocklengths.
pub fn optimize_blocklength(
    template: &SystemConfig,
    retx: &RetxConfig,
    betas: &[u32],
    objective: Objective,
) -> Result<GridOptimum> {
    optimize_grid(betas, objective, |beta| SystemConfig { blocklength: beta, ..*template }, retx)
}

/// Exhaustive search over relay counts.
pub fn optimize_relays(
    template: &SystemConfig,
    retx: &RetxConfig,
    relays: &[u32],
    objective: Objective,
) -> Result<GridOptimum> {
    optimize_grid(relays, objective, |k| SystemConfig { relays: k, ..*template }, retx)
}
