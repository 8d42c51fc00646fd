//! Average block error rate per hop and end to end.
//!
//! The per-hop value averages the piecewise-linear conditional BLER over the
//! output-SNR distribution of the diversity scheme, which reduces to
//! `xi sqrt(beta) ∫_{phi_low}^{phi_high} F(gamma) dgamma` for the CDF `F`.
//! The closed forms expand `F` binomially; quadrature routes exist as
//! independent checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbl::{build_fbl_params, instantaneous_bler_slope, FblParams};
use crate::model::{build_hop_budgets, coding_rate, HopBudget, Scheme, SystemConfig};
use crate::quadrature::integrate_with_breaks;
use crate::special::{lower_incomplete_gamma, regularized_gamma};

/// Relative tolerance of the validation quadratures.
pub const QUADRATURE_REL_TOL: f64 = 1e-12;

/// How a per-hop BLER was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlerMethod {
    ClosedForm,
    QuadraturePsi,
    QuadratureExactQ,
}

/// Which conditional-error model a quadrature integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Integrand {
    /// Piecewise-linear surrogate.
    Psi,
    /// Normal approximation `Q((C - R) / sqrt(V / beta))`.
    ExactQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopBler {
    pub hop_index: usize,
    pub scheme: Scheme,
    pub value: f64,
    pub method: BlerMethod,
    /// Set when the raw value strayed outside `[0, 1]` and was clamped.
    pub clamped: bool,
}

impl HopBler {
    fn new(budget: &HopBudget, scheme: Scheme, raw: f64, method: BlerMethod) -> Self {
        let value = raw.clamp(0.0, 1.0);
        HopBler {
            hop_index: budget.hop_index,
            scheme,
            value,
            method,
            clamped: value != raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerReport {
    pub config: SystemConfig,
    pub per_hop: Vec<HopBler>,
    pub e2e: f64,
}

fn check_snr(gamma_bar: f64) -> Result<()> {
    if !(gamma_bar > 0.0 && gamma_bar.is_finite()) {
        return Err(Error::domain(
            "gamma_bar",
            format!("average SNR must be finite and positive, got {gamma_bar}"),
        ));
    }
    Ok(())
}

fn check_antennas(tx: u32, rx: u32) -> Result<()> {
    if tx == 0 || rx == 0 {
        return Err(Error::domain("antennas", "need at least one antenna on each side"));
    }
    Ok(())
}

/// CDF of the TAS/MRC output SNR: `P(N_R, gamma / gamma_bar)^N_T`, with `P`
/// the regularized lower incomplete gamma function.
pub fn cdf_tas_mrc(gamma: f64, gamma_bar: f64, tx: u32, rx: u32) -> Result<f64> {
    check_snr(gamma_bar)?;
    check_antennas(tx, rx)?;
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    let (p, _) = regularized_gamma(f64::from(rx), gamma / gamma_bar)?;
    Ok(p.powi(tx as i32))
}

/// CDF of the TAS/SC output SNR: `(1 - e^{-gamma / gamma_bar})^{N_T N_R}`.
pub fn cdf_tas_sc(gamma: f64, gamma_bar: f64, tx: u32, rx: u32) -> Result<f64> {
    check_snr(gamma_bar)?;
    check_antennas(tx, rx)?;
    if gamma <= 0.0 {
        return Ok(0.0);
    }
    Ok((-(-gamma / gamma_bar).exp_m1()).powi((tx * rx) as i32))
}

pub fn scheme_cdf(scheme: Scheme, gamma: f64, gamma_bar: f64, tx: u32, rx: u32) -> Result<f64> {
    match scheme {
        Scheme::TasMrc => cdf_tas_mrc(gamma, gamma_bar, tx, rx),
        Scheme::TasSc => cdf_tas_sc(gamma, gamma_bar, tx, rx),
    }
}

/// Complementary CDF `1 - F(gamma)`, accurate when `F` is close to one.
pub fn scheme_survival(scheme: Scheme, gamma: f64, gamma_bar: f64, tx: u32, rx: u32) -> Result<f64> {
    check_snr(gamma_bar)?;
    check_antennas(tx, rx)?;
    if gamma <= 0.0 {
        return Ok(1.0);
    }
    let x = gamma / gamma_bar;
    let (power, tail) = match scheme {
        Scheme::TasMrc => (tx, regularized_gamma(f64::from(rx), x)?.1),
        Scheme::TasSc => (tx * rx, (-x).exp()),
    };
    // 1 - (1 - tail)^power
    Ok(-(f64::from(power) * (-tail).ln_1p()).exp_m1())
}

/// Per-hop success probability `1 - eps` integrated from the survival
/// function, so it keeps relative accuracy where the BLER rounds to one.
pub fn hop_success_quadrature(
    budget: &HopBudget,
    p: &FblParams,
    scheme: Scheme,
    tx: u32,
    rx: u32,
    integrand: Integrand,
) -> Result<f64> {
    check_snr(budget.avg_snr)?;
    check_antennas(tx, rx)?;
    let surv = |g: f64| scheme_survival(scheme, g, budget.avg_snr, tx, rx).unwrap_or(f64::NAN);
    let value = match integrand {
        Integrand::Psi => {
            if p.phi_high <= p.phi_low {
                return Ok(1.0);
            }
            // Mass of the surrogate below its clamped lower knee.
            let floor = if p.phi_low_clamped() {
                1.0 - p.slope() * (p.phi_high - p.phi_low)
            } else {
                0.0
            };
            let area = integrate_with_breaks(surv, &[p.phi_low, p.tau, p.phi_high], QUADRATURE_REL_TOL)?;
            floor + p.slope() * area
        }
        Integrand::ExactQ => {
            let (rate, beta) = (p.rate, p.blocklength);
            integrate_with_breaks(
                |g| surv(g) * instantaneous_bler_slope(g, rate, beta),
                &exact_q_breaks(p),
                QUADRATURE_REL_TOL,
            )?
        }
    };
    Ok(value.clamp(0.0, 1.0))
}

/// `ln Π_k (1 - eps_k)` for the whole route.
pub fn e2e_log_success(cfg: &SystemConfig, integrand: Integrand) -> Result<f64> {
    let budgets = build_hop_budgets(cfg)?;
    let params = build_fbl_params(coding_rate(cfg), cfg.blocklength)?;
    budgets.iter().try_fold(0.0, |acc, b| {
        hop_success_quadrature(b, &params, cfg.scheme, cfg.tx_antennas, cfg.rx_antennas, integrand)
            .map(|s| acc + s.ln())
    })
}

/// Orders two configurations by end-to-end reliability (`Less` means `a`
/// has the lower BLER). Uses the closed form where it resolves the
/// difference and the log success probability where the BLER saturates.
pub fn compare_reliability(a: &SystemConfig, b: &SystemConfig) -> Result<std::cmp::Ordering> {
    let (ea, eb) = (bler_report(a)?.e2e, bler_report(b)?.e2e);
    if ea < 0.5 && eb < 0.5 {
        return Ok(ea.total_cmp(&eb));
    }
    Ok(e2e_log_success(b, Integrand::Psi)?.total_cmp(&e2e_log_success(a, Integrand::Psi)?))
}

/// A binomial expansion that lost more than this fraction of its digits to
/// cancellation is re-evaluated with the positive-term series.
const CANCELLATION_LIMIT: f64 = 1e-4;

/// Closed-form average BLER of one hop.
pub fn hop_bler_closed_form(
    budget: &HopBudget,
    p: &FblParams,
    scheme: Scheme,
    tx: u32,
    rx: u32,
) -> Result<HopBler> {
    check_snr(budget.avg_snr)?;
    check_antennas(tx, rx)?;
    let gamma_bar = budget.avg_snr;
    let expansion = match scheme {
        Scheme::TasMrc => mrc_expansion(gamma_bar, p, tx, rx)?,
        Scheme::TasSc => sc_expansion(gamma_bar, p, tx * rx)?,
    };
    let raw = if expansion.value.abs() >= CANCELLATION_LIMIT * expansion.magnitude {
        expansion.value
    } else {
        // Same integral, expanded in P(r, x) instead of 1 - Q(r, x).
        let (copies, order) = match scheme {
            Scheme::TasMrc => (tx, rx),
            Scheme::TasSc => (tx * rx, 1),
        };
        p.slope() * gamma_bar * positive_series(gamma_bar, p, copies, order)?
    };
    if !raw.is_finite() {
        return Err(Error::range(
            "closed-form hop BLER",
            format!("non-finite result for N_T={tx}, N_R={rx}, gamma_bar={gamma_bar}"),
        ));
    }
    Ok(HopBler::new(budget, scheme, raw, BlerMethod::ClosedForm))
}

struct Expansion {
    value: f64,
    /// Sum of absolute values of every term, for the cancellation check.
    magnitude: f64,
}

/// `∫_{z1}^{z2} e^{-t} t^{a-1} dt`, taken from whichever incomplete-gamma
/// tail keeps the difference well conditioned.
fn gamma_increment(a: f64, z1: f64, z2: f64) -> Result<f64> {
    if z2 <= z1 {
        return Ok(0.0);
    }
    if z1 > a {
        let (_, q1) = regularized_gamma(a, z1)?;
        let (_, q2) = regularized_gamma(a, z2)?;
        Ok(statrs::function::gamma::gamma(a) * (q1 - q2))
    } else {
        Ok(lower_incomplete_gamma(a, z2)? - lower_incomplete_gamma(a, z1)?)
    }
}

fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// Coefficients of `(Σ_{j<order} x^j / j!)^power`, indexed by degree.
///
/// Grouping the `N_R^m` index tuples by their sum `S` leaves exactly these
/// coefficients as the weights.
pub fn truncated_exp_power(order: u32, power: u32) -> Vec<f64> {
    let base: Vec<f64> = (0..order)
        .scan(1.0, |fact, j| {
            if j > 0 {
                *fact *= f64::from(j);
            }
            Some(1.0 / *fact)
        })
        .collect();
    let mut acc = vec![1.0];
    for _ in 0..power {
        let mut next = vec![0.0; acc.len() + base.len() - 1];
        for (i, a) in acc.iter().enumerate() {
            for (j, b) in base.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        acc = next;
    }
    acc
}

fn mrc_expansion(gamma_bar: f64, p: &FblParams, tx: u32, rx: u32) -> Result<Expansion> {
    let slope = p.slope();
    let mut value = 1.0;
    let mut magnitude = 1.0;
    for m in 1..=tx {
        let mf = f64::from(m);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let outer = binomial(tx, m) * slope * gamma_bar;
        let z_low = mf * p.phi_low / gamma_bar;
        let z_high = mf * p.phi_high / gamma_bar;
        for (s, coeff) in truncated_exp_power(rx, m).into_iter().enumerate() {
            let a = s as f64 + 1.0;
            let term = outer * coeff * mf.powf(-a) * gamma_increment(a, z_low, z_high)?;
            value += sign * term;
            magnitude += term.abs();
        }
    }
    if !magnitude.is_finite() {
        return Err(Error::range(
            "TAS/MRC expansion",
            format!("terms overflow for N_T={tx}, N_R={rx}"),
        ));
    }
    Ok(Expansion { value, magnitude })
}

fn sc_expansion(gamma_bar: f64, p: &FblParams, branches: u32) -> Result<Expansion> {
    let slope = p.slope();
    let mut value = 1.0;
    let mut magnitude = 1.0;
    for m in 1..=branches {
        let mf = f64::from(m);
        let sign = if m % 2 == 0 { -1.0 } else { 1.0 };
        let diff = (-mf * p.phi_high / gamma_bar).exp() - (-mf * p.phi_low / gamma_bar).exp();
        let term = binomial(branches, m) * slope * gamma_bar / mf * diff;
        value += sign * term;
        magnitude += term.abs();
    }
    if !magnitude.is_finite() {
        return Err(Error::range(
            "TAS/SC expansion",
            format!("terms overflow for {branches} branches"),
        ));
    }
    Ok(Expansion { value, magnitude })
}

const SERIES_MAX_TERMS: usize = 20_000;

/// `∫_{x_low}^{x_high} P(order, x)^copies dx` (with `x = gamma / gamma_bar`)
/// as a series of non-negative terms.
///
/// Writing `P(r, x)^M = e^{-Mx} Σ_s b_s x^s`, each term integrates to an
/// incomplete gamma increment. The weights `w_s = b_s s! / M^s` are the
/// probabilities that `s` balls thrown into `M` boxes leave at least `r` in
/// every box, built box by box with binomial mixing.
fn positive_series(gamma_bar: f64, p: &FblParams, copies: u32, order: u32) -> Result<f64> {
    let m = f64::from(copies);
    let z_low = m * p.phi_low / gamma_bar;
    let z_high = m * p.phi_high / gamma_bar;
    let start = (copies * order) as usize;

    let mut weights = OccupancyWeights::new(copies, order);
    let mut sum = 0.0;
    for s in start..start + SERIES_MAX_TERMS {
        let w = weights.weight(s);
        let a = s as f64 + 1.0;
        let (p_high, q_high) = regularized_gamma(a, z_high)?;
        let (p_low, q_low) = regularized_gamma(a, z_low)?;
        let increment = if z_low > a { q_low - q_high } else { p_high - p_low };
        let term = w * increment / m;
        sum += term;
        if (s as f64) > z_high && p_high <= 1e-17 * sum {
            return Ok(sum);
        }
    }
    Err(Error::range(
        "positive BLER series",
        format!("no convergence within {SERIES_MAX_TERMS} terms (z={z_high})"),
    ))
}

/// Incrementally computed occupancy probabilities
/// `w_j(s) = P(every one of j boxes holds >= r of s uniform balls)`.
struct OccupancyWeights {
    boxes: u32,
    min_count: usize,
    /// `table[j - 1][s]` for `j` boxes.
    table: Vec<Vec<f64>>,
}

impl OccupancyWeights {
    fn new(boxes: u32, min_count: u32) -> Self {
        OccupancyWeights {
            boxes,
            min_count: min_count as usize,
            table: vec![Vec::new(); boxes as usize],
        }
    }

    fn weight(&mut self, s: usize) -> f64 {
        for j in 1..=self.boxes as usize {
            while self.table[j - 1].len() <= s {
                let n = self.table[j - 1].len();
                let w = self.compute(j, n);
                self.table[j - 1].push(w);
            }
        }
        self.table[self.boxes as usize - 1][s]
    }

    fn compute(&self, j: usize, s: usize) -> f64 {
        let r = self.min_count;
        if j == 1 {
            return if s >= r { 1.0 } else { 0.0 };
        }
        if s < j * r {
            return 0.0;
        }
        // The last box receives k balls ~ Binomial(s, 1/j); the rest are
        // uniform over j - 1 boxes.
        let prev = &self.table[j - 2];
        let q = 1.0 / j as f64;
        let ln_q = q.ln();
        let ln_rest = (1.0 - q).ln();
        let ln_fact_s = ln_factorial(s);
        (r..=s - (j - 1) * r)
            .map(|k| {
                let ln_pmf = ln_fact_s - ln_factorial(k) - ln_factorial(s - k)
                    + k as f64 * ln_q
                    + (s - k) as f64 * ln_rest;
                ln_pmf.exp() * prev[s - k]
            })
            .sum()
    }
}

fn ln_factorial(n: usize) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}

/// Breakpoints for integrals against `-eps'(gamma)`, which is concentrated
/// around `tau` and negligible past the point where the Q-function argument
/// exceeds 40.
fn exact_q_breaks(p: &FblParams) -> Vec<f64> {
    let width = p.phi_high - p.tau;
    let upper = 2f64.powf(p.rate + 40.0 * std::f64::consts::LOG2_E / f64::from(p.blocklength).sqrt()) - 1.0;
    let mut points = vec![
        0.0,
        p.phi_low,
        p.tau,
        p.phi_high,
        p.tau + 4.0 * width,
        p.tau + 16.0 * width,
        upper,
    ];
    points.retain(|x| *x >= 0.0 && *x <= upper);
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

/// Validation quadrature of the per-hop BLER.
pub fn hop_bler_quadrature(
    budget: &HopBudget,
    p: &FblParams,
    scheme: Scheme,
    tx: u32,
    rx: u32,
    integrand: Integrand,
) -> Result<HopBler> {
    check_snr(budget.avg_snr)?;
    check_antennas(tx, rx)?;
    let gamma_bar = budget.avg_snr;
    let cdf = |g: f64| scheme_cdf(scheme, g, gamma_bar, tx, rx).unwrap_or(f64::NAN);
    let (raw, method) = match integrand {
        Integrand::Psi => {
            if p.phi_high <= p.phi_low {
                (0.0, BlerMethod::QuadraturePsi)
            } else {
                let area = integrate_with_breaks(cdf, &[p.phi_low, p.tau, p.phi_high], QUADRATURE_REL_TOL)?;
                (p.slope() * area, BlerMethod::QuadraturePsi)
            }
        }
        Integrand::ExactQ => {
            // E[eps(gamma)] = ∫ F(gamma) (-eps'(gamma)) dgamma
            let points = exact_q_breaks(p);
            let rate = p.rate;
            let beta = p.blocklength;
            let value = integrate_with_breaks(
                |g| cdf(g) * instantaneous_bler_slope(g, rate, beta),
                &points,
                QUADRATURE_REL_TOL,
            )?;
            (value, BlerMethod::QuadratureExactQ)
        }
    };
    Ok(HopBler::new(budget, scheme, raw, method))
}

/// End-to-end BLER of a selective decode-and-forward route.
pub fn e2e_bler(per_hop: &[HopBler]) -> Result<f64> {
    let values: Vec<f64> = per_hop.iter().map(|h| h.value).collect();
    compose_e2e(&values)
}

/// `eps_1 + Σ_{k≥2} eps_k Π_{m<k} (1 - eps_m)`, i.e. `1 - Π(1 - eps_k)`
/// summed term by term so tiny values keep their relative precision.
pub fn compose_e2e(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("per_hop", "at least one hop is required"));
    }
    if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::domain("per_hop", format!("BLER {bad} outside [0, 1]")));
    }
    let mut survive = 1.0;
    let mut total = 0.0;
    for &eps in values {
        total += eps * survive;
        survive *= 1.0 - eps;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Closed-form analysis of a full configuration.
pub fn bler_report(cfg: &SystemConfig) -> Result<BlerReport> {
    let budgets = build_hop_budgets(cfg)?;
    let params = build_fbl_params(coding_rate(cfg), cfg.blocklength)?;
    let per_hop = budgets
        .iter()
        .map(|b| hop_bler_closed_form(b, &params, cfg.scheme, cfg.tx_antennas, cfg.rx_antennas))
        .collect::<Result<Vec<_>>>()?;
    let e2e = e2e_bler(&per_hop)?;
    Ok(BlerReport {
        config: *cfg,
        per_hop,
        e2e,
    })
}

/// End-to-end BLER from either quadrature route, for validation.
pub fn e2e_bler_quadrature(cfg: &SystemConfig, integrand: Integrand) -> Result<f64> {
    let budgets = build_hop_budgets(cfg)?;
    let params = build_fbl_params(coding_rate(cfg), cfg.blocklength)?;
    let per_hop = budgets
        .iter()
        .map(|b| hop_bler_quadrature(b, &params, cfg.scheme, cfg.tx_antennas, cfg.rx_antennas, integrand))
        .collect::<Result<Vec<_>>>()?;
    e2e_bler(&per_hop)
}
