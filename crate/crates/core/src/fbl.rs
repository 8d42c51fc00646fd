//! Finite-blocklength primitives: capacity, dispersion, the normal
//! approximation of the block error probability and its piecewise-linear
//! surrogate.

use std::f64::consts::{LOG2_E, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{inv_q_function, normal_pdf, q_function};

/// Shannon capacity `log2(1 + gamma)` in bits per channel use.
pub fn capacity(gamma: f64) -> f64 {
    gamma.ln_1p() * LOG2_E
}

/// Channel dispersion `(1 - (1 + gamma)^-2) (log2 e)^2`.
pub fn dispersion(gamma: f64) -> f64 {
    let inv = 1.0 / (1.0 + gamma);
    // 1 - inv^2 = (1 - inv)(1 + inv), with 1 - inv = gamma / (1 + gamma)
    (gamma * inv) * (1.0 + inv) * LOG2_E * LOG2_E
}

/// Constants of the piecewise-linear approximation of the conditional BLER
/// around the threshold SNR `tau = 2^R - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FblParams {
    pub rate: f64,
    pub blocklength: u32,
    pub xi: f64,
    pub tau: f64,
    /// Lower knee, clamped at zero.
    pub phi_low: f64,
    pub phi_high: f64,
}

impl FblParams {
    /// Slope magnitude `xi * sqrt(beta)` of the linear segment.
    pub fn slope(&self) -> f64 {
        self.xi * f64::from(self.blocklength).sqrt()
    }

    /// Whether the unclamped lower knee would have been negative.
    pub fn phi_low_clamped(&self) -> bool {
        self.tau - 0.5 / self.slope() < 0.0
    }
}

pub fn build_fbl_params(rate: f64, blocklength: u32) -> Result<FblParams> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::domain("rate", format!("must be finite and positive, got {rate}")));
    }
    if blocklength == 0 {
        return Err(Error::domain("blocklength", "must be at least 1"));
    }
    let xi = (2.0 * PI * (2f64.powf(2.0 * rate) - 1.0)).powf(-0.5);
    let tau = 2f64.powf(rate) - 1.0;
    let half_width = 0.5 / (xi * f64::from(blocklength).sqrt());
    if !(xi > 0.0 && tau.is_finite()) {
        return Err(Error::range("fbl params", format!("rate {rate} overflows the SNR threshold")));
    }
    Ok(FblParams {
        rate,
        blocklength,
        xi,
        tau,
        phi_low: (tau - half_width).max(0.0),
        phi_high: tau + half_width,
    })
}

/// Normal-approximation block error probability at instantaneous SNR `gamma`.
pub fn instantaneous_bler(gamma: f64, rate: f64, blocklength: u32) -> f64 {
    let v = dispersion(gamma);
    let margin = capacity(gamma) - rate;
    if v == 0.0 {
        return if margin < 0.0 {
            1.0
        } else if margin > 0.0 {
            0.0
        } else {
            0.5
        };
    }
    q_function(margin / (v / f64::from(blocklength)).sqrt())
}

/// `1 - instantaneous_bler`, evaluated as an upper tail so it keeps relative
/// accuracy when the BLER is close to one.
pub fn instantaneous_success(gamma: f64, rate: f64, blocklength: u32) -> f64 {
    let v = dispersion(gamma);
    let margin = capacity(gamma) - rate;
    if v == 0.0 {
        return if margin < 0.0 {
            0.0
        } else if margin > 0.0 {
            1.0
        } else {
            0.5
        };
    }
    q_function(-margin / (v / f64::from(blocklength)).sqrt())
}

/// `-d/dgamma` of [`instantaneous_bler`]; a density on `[0, ∞)` integrating
/// to `instantaneous_bler(0)`.
pub fn instantaneous_bler_slope(gamma: f64, rate: f64, blocklength: u32) -> f64 {
    let v = dispersion(gamma);
    if v == 0.0 {
        return 0.0;
    }
    let sqrt_beta = f64::from(blocklength).sqrt();
    let sqrt_v = v.sqrt();
    let margin = capacity(gamma) - rate;
    let u = sqrt_beta * margin / sqrt_v;
    let inv = 1.0 / (1.0 + gamma);
    let dc = LOG2_E * inv;
    let dv = 2.0 * LOG2_E * LOG2_E * inv * inv * inv;
    let du = sqrt_beta * (dc * sqrt_v - margin * dv / (2.0 * sqrt_v)) / v;
    normal_pdf(u) * du
}

/// Piecewise-linear surrogate of the conditional BLER: 1 below `phi_low`,
/// 0 above `phi_high`, linear through `(tau, 0.5)` in between.
pub fn psi_approx(gamma: f64, p: &FblParams) -> f64 {
    if gamma <= p.phi_low {
        1.0
    } else if gamma >= p.phi_high {
        0.0
    } else {
        (0.5 - p.slope() * (gamma - p.tau)).clamp(0.0, 1.0)
    }
}

/// Approximate maximum coding rate at SNR `gamma` for a target BLER.
pub fn max_coding_rate(gamma: f64, blocklength: u32, target_bler: f64) -> Result<f64> {
    if !(target_bler > 0.0 && target_bler < 1.0) {
        return Err(Error::domain(
            "target_bler",
            format!("must lie in (0, 1), got {target_bler}"),
        ));
    }
    let penalty = (dispersion(gamma) / f64::from(blocklength)).sqrt() * inv_q_function(target_bler)?;
    Ok(capacity(gamma) - penalty)
}
