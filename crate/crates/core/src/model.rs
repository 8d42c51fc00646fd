//! Network parameterization and the per-hop average-SNR budget.
//!
//! Every hop uses the simplified path-loss model `E|h|^2 = d^-eta` with the
//! source-destination distance and the total transmit power split equally
//! across the `K + 1` hops.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Blocklengths shorter than this are outside the short-packet regime the
/// normal approximation is calibrated for.
pub const MIN_RECOMMENDED_BLOCKLENGTH: u32 = 100;

/// Diversity scheme applied on every hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// Transmit antenna selection with maximum ratio combining.
    #[serde(rename = "tas-mrc")]
    TasMrc,
    /// Transmit antenna selection with selection combining.
    #[serde(rename = "tas-sc")]
    TasSc,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::TasMrc, Scheme::TasSc];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::TasMrc => "tas-mrc",
            Scheme::TasSc => "tas-sc",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "tas-mrc" | "mrc" => Ok(Scheme::TasMrc),
            "tas-sc" | "sc" => Ok(Scheme::TasSc),
            other => Err(Error::domain("scheme", format!("unknown scheme `{other}`"))),
        }
    }
}

/// Full network and waveform parameterization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of relays `K`; the route has `K + 1` hops.
    pub relays: u32,
    pub tx_antennas: u32,
    pub rx_antennas: u32,
    /// Information bits per packet.
    pub info_bits: u32,
    /// Blocklength in channel uses.
    pub blocklength: u32,
    pub pathloss_exponent: f64,
    /// Normalized source-destination distance.
    pub total_distance: f64,
    /// Total transmit SNR `P_S / N_0` in dB.
    pub avg_snr_db: f64,
    pub scheme: Scheme,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            relays: 3,
            tx_antennas: 2,
            rx_antennas: 2,
            info_bits: 1024,
            blocklength: 128,
            pathloss_exponent: 3.0,
            total_distance: 1.0,
            avg_snr_db: 0.0,
            scheme: Scheme::TasMrc,
        }
    }
}

/// Non-fatal observations about an accepted configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigFlag {
    /// Blocklength below [`MIN_RECOMMENDED_BLOCKLENGTH`].
    ShortBlocklength,
}

impl ConfigFlag {
    pub fn label(self) -> &'static str {
        match self {
            ConfigFlag::ShortBlocklength => "short-blocklength",
        }
    }
}

impl SystemConfig {
    pub fn hops(&self) -> usize {
        self.relays as usize + 1
    }

    /// Product `N_T * N_R`, the full diversity order of both schemes.
    pub fn diversity(&self) -> u32 {
        self.tx_antennas * self.rx_antennas
    }

    pub fn avg_snr_linear(&self) -> f64 {
        db_to_linear(self.avg_snr_db)
    }

    /// Checks the structural invariants and returns any non-fatal flags.
    pub fn validate(&self) -> Result<Vec<ConfigFlag>> {
        if self.tx_antennas == 0 {
            return Err(Error::domain("tx_antennas", "must be at least 1"));
        }
        if self.rx_antennas == 0 {
            return Err(Error::domain("rx_antennas", "must be at least 1"));
        }
        if self.info_bits == 0 {
            return Err(Error::domain("info_bits", "must be at least 1"));
        }
        if self.blocklength == 0 {
            return Err(Error::domain("blocklength", "must be at least 1"));
        }
        if !(self.pathloss_exponent.is_finite() && self.pathloss_exponent > 0.0) {
            return Err(Error::domain(
                "pathloss_exponent",
                format!("must be finite and positive, got {}", self.pathloss_exponent),
            ));
        }
        if !(self.total_distance.is_finite() && self.total_distance > 0.0) {
            return Err(Error::domain(
                "total_distance",
                format!("must be finite and positive, got {}", self.total_distance),
            ));
        }
        if !self.avg_snr_db.is_finite() {
            return Err(Error::domain("avg_snr_db", "must be finite"));
        }
        let mut flags = Vec::new();
        if self.blocklength < MIN_RECOMMENDED_BLOCKLENGTH {
            flags.push(ConfigFlag::ShortBlocklength);
        }
        Ok(flags)
    }
}

/// Coding rate `T / beta` in bits per channel use.
pub fn coding_rate(cfg: &SystemConfig) -> f64 {
    f64::from(cfg.info_bits) / f64::from(cfg.blocklength)
}

/// Derived quantities for one hop of the route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopBudget {
    /// 1-based hop index.
    pub hop_index: usize,
    pub distance: f64,
    /// `E|h|^2 / (K + 1)`: path gain with the equal power split folded in.
    pub channel_gain: f64,
    /// Average per-branch SNR on this hop, linear scale.
    pub avg_snr: f64,
}

/// Builds the `K + 1` hop budgets under equal spacing and equal power split.
pub fn build_hop_budgets(cfg: &SystemConfig) -> Result<Vec<HopBudget>> {
    cfg.validate()?;
    let hops = cfg.hops();
    let distance = cfg.total_distance / hops as f64;
    let channel_gain = distance.powf(-cfg.pathloss_exponent) / hops as f64;
    let snr = cfg.avg_snr_linear();
    Ok((1..=hops)
        .map(|hop_index| HopBudget {
            hop_index,
            distance,
            channel_gain,
            avg_snr: channel_gain * snr,
        })
        .collect())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
