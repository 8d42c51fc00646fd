//! High-SNR behaviour: per-hop and end-to-end asymptotes, diversity order,
//! array gain and the SNR gap between the two schemes.

use serde::{Deserialize, Serialize};

use crate::analytic::bler_report;
use crate::error::{Error, Result};
use crate::fbl::{build_fbl_params, FblParams};
use crate::model::{build_hop_budgets, coding_rate, linear_to_db, HopBudget, Scheme, SystemConfig};

/// BLER window used for slope fits: below it double precision dominates,
/// above it the curve has not reached its asymptotic slope.
pub const TAIL_WINDOW: (f64, f64) = (1e-12, 1e-3);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub per_hop_asym: Vec<f64>,
    pub e2e_asym: f64,
    pub diversity_order: f64,
    pub array_gain: f64,
    /// Scheme-dependent numerator of the array gain.
    pub y_factor: f64,
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `xi sqrt(beta) (phi_H^{D+1} - phi_L^{D+1}) / (D + 1)`, divided by
/// `(N_R!)^{N_T}` for TAS/MRC.
pub fn y_factor(p: &FblParams, scheme: Scheme, tx: u32, rx: u32) -> f64 {
    let order = (tx * rx) as i32;
    let spread = p.phi_high.powi(order + 1) - p.phi_low.powi(order + 1);
    let base = p.slope() * spread / f64::from(order as u32 + 1);
    match scheme {
        Scheme::TasMrc => base / factorial(rx).powi(tx as i32),
        Scheme::TasSc => base,
    }
}

/// Leading-order per-hop BLER as `gamma_bar_k → ∞`.
pub fn hop_bler_asymptotic(budget: &HopBudget, p: &FblParams, scheme: Scheme, tx: u32, rx: u32) -> Result<f64> {
    if !(budget.avg_snr > 0.0 && budget.avg_snr.is_finite()) {
        return Err(Error::domain("gamma_bar", format!("must be finite and positive, got {}", budget.avg_snr)));
    }
    let order = (tx * rx) as i32;
    // phi^{D+1} / gamma^D, arranged to stay in range for large D
    let ratio = |phi: f64| phi * (phi / budget.avg_snr).powi(order);
    let spread = ratio(p.phi_high) - ratio(p.phi_low);
    let mut value = p.slope() * spread / f64::from(order as u32 + 1);
    if scheme == Scheme::TasMrc {
        value /= factorial(rx).powi(tx as i32);
    }
    Ok(value)
}

/// Sum of per-hop asymptotes.
pub fn e2e_bler_asymptotic(per_hop_asym: &[f64]) -> f64 {
    per_hop_asym.iter().sum()
}

/// Array gain `(Y Σ_k c_k^{-D})^{-1/D}`.
pub fn array_gain(cfg: &SystemConfig, budgets: &[HopBudget], p: &FblParams, scheme: Scheme) -> f64 {
    let order = cfg.diversity() as i32;
    let gains: f64 = budgets.iter().map(|b| b.channel_gain.powi(-order)).sum();
    (y_factor(p, scheme, cfg.tx_antennas, cfg.rx_antennas) * gains).powf(-1.0 / f64::from(order))
}

/// SNR gap between TAS/SC and TAS/MRC asymptotes: `10 log10((N_R!)^{1/N_R})`.
pub fn snr_gap_db(rx: u32) -> f64 {
    10.0 * factorial(rx).log10() / f64::from(rx)
}

/// Total SNR (dB) at which the e2e asymptote `(G gamma)^{-D}` reaches `target`.
pub fn asymptote_crossing_db(report: &AsymptoticReport, target: f64) -> f64 {
    let gamma = target.powf(-1.0 / report.diversity_order) / report.array_gain;
    linear_to_db(gamma)
}

pub fn asymptotic_report(cfg: &SystemConfig) -> Result<AsymptoticReport> {
    let budgets = build_hop_budgets(cfg)?;
    let p = build_fbl_params(coding_rate(cfg), cfg.blocklength)?;
    let per_hop_asym = budgets
        .iter()
        .map(|b| hop_bler_asymptotic(b, &p, cfg.scheme, cfg.tx_antennas, cfg.rx_antennas))
        .collect::<Result<Vec<_>>>()?;
    Ok(AsymptoticReport {
        e2e_asym: e2e_bler_asymptotic(&per_hop_asym),
        per_hop_asym,
        diversity_order: f64::from(cfg.diversity()),
        array_gain: array_gain(cfg, &budgets, &p, cfg.scheme),
        y_factor: y_factor(&p, cfg.scheme, cfg.tx_antennas, cfg.rx_antennas),
    })
}

/// Least-squares slope of `-log10(BLER)` against `log10(gamma_bar)`.
pub fn diversity_order_fit(snr_db: &[f64], bler: &[f64]) -> Result<f64> {
    if snr_db.len() != bler.len() {
        return Err(Error::domain("grid", "SNR and BLER lists differ in length"));
    }
    if snr_db.len() < 2 {
        return Err(Error::domain("grid", "need at least two points"));
    }
    if let Some(v) = bler.iter().find(|v| !(**v > 0.0 && **v < TAIL_WINDOW.1)) {
        return Err(Error::domain("bler", format!("{v} is not on the asymptotic tail (0, 1e-3)")));
    }
    let n = snr_db.len() as f64;
    let xs: Vec<f64> = snr_db.iter().map(|db| db / 10.0).collect();
    let ys: Vec<f64> = bler.iter().map(|b| -b.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return Err(Error::domain("grid", "SNR points are all equal"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// Fits the diversity order of the closed-form e2e BLER over the grid
/// points that fall inside [`TAIL_WINDOW`].
pub fn closed_form_diversity(cfg: &SystemConfig, snr_db_grid: &[f64]) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &db in snr_db_grid {
        let point = SystemConfig { avg_snr_db: db, ..*cfg };
        let e2e = bler_report(&point)?.e2e;
        if (TAIL_WINDOW.0..=TAIL_WINDOW.1).contains(&e2e) {
            xs.push(db);
            ys.push(e2e);
        }
    }
    diversity_order_fit(&xs, &ys)
}
