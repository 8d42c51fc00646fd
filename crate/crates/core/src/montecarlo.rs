//! Monte Carlo estimation of per-hop and end-to-end BLER.
//!
//! Channels are quasi-static Rayleigh: each trial draws `N_T * N_R`
//! independent exponential branch SNRs per hop and applies the scheme's
//! selection rule. The conditional error uses the exact normal
//! approximation, so simulation and closed form differ by the
//! linearization error only.
//!
//! Randomness is counter based. Hop `k` owns ChaCha stream `k` under the
//! run seed, and trial `t` always consumes the same fixed window of that
//! stream. Chunks seek to their first trial, so results do not depend on
//! the chunk size or on which thread ran which chunk; sums are exact until
//! the final rounding.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::compose_e2e;
use crate::error::{Error, Result};
use crate::exact_sum::ExactSum;
use crate::fbl::{instantaneous_bler, instantaneous_success};
use crate::model::{coding_rate, HopBudget, Scheme, SystemConfig};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimator {
    /// Average of the conditional BLER over channel draws.
    SemiAnalytic,
    /// Average of simulated block-error indicators.
    Bernoulli,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "semi" | "semi-analytic" | "semi_analytic" => Ok(Estimator::SemiAnalytic),
            "bernoulli" => Ok(Estimator::Bernoulli),
            other => Err(Error::domain("estimator", format!("unknown estimator `{other}`"))),
        }
    }
}

impl Estimator {
    pub fn label(self) -> &'static str {
        match self {
            Estimator::SemiAnalytic => "semi",
            Estimator::Bernoulli => "bernoulli",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub trials: u64,
    pub seed: u64,
    pub estimator: Estimator,
    pub chunk_size: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            trials: 100_000,
            seed: 1,
            estimator: Estimator::SemiAnalytic,
            chunk_size: 10_000,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials < 2 {
            return Err(Error::domain("trials", "at least two trials are needed for a confidence interval"));
        }
        if self.chunk_size == 0 {
            return Err(Error::domain("chunk_size", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub ci_halfwidth_95: f64,
    /// Interval bounds; symmetric about `mean` except for the Wilson interval.
    pub ci_low: f64,
    pub ci_high: f64,
    /// The same estimate and interval for the success probability `1 - BLER`,
    /// computed without cancellation when the BLER is close to one.
    pub success_mean: f64,
    pub success_ci_low: f64,
    pub success_ci_high: f64,
    pub trials_used: u64,
}

impl McEstimate {
    pub fn contains(&self, value: f64) -> bool {
        (self.ci_low..=self.ci_high).contains(&value)
    }

    pub fn contains_success(&self, value: f64) -> bool {
        (self.success_ci_low..=self.success_ci_high).contains(&value)
    }
}

/// Selects the output SNR from `tx * rx` branch SNRs laid out transmit
/// antenna major (`branches[i * rx + j]`).
pub fn select_snr(branches: &[f64], rx: u32, scheme: Scheme) -> f64 {
    match scheme {
        Scheme::TasMrc => branches
            .chunks(rx as usize)
            .map(|row| row.iter().sum::<f64>())
            .fold(0.0, f64::max),
        Scheme::TasSc => branches.iter().copied().fold(0.0, f64::max),
    }
}

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn exponential(rng: &mut impl RngCore, mean: f64) -> f64 {
    // 1 - u is exact for a 53-bit uniform, so ln needs no log1p
    -mean * (1.0 - uniform(rng)).ln()
}

/// Draws one instantaneous output SNR for a hop with average branch SNR
/// `gamma_bar`.
pub fn draw_hop_snr(gamma_bar: f64, tx: u32, rx: u32, scheme: Scheme, rng: &mut impl RngCore) -> f64 {
    let mut branches = [0.0f64; 64];
    let n = (tx * rx) as usize;
    if n <= branches.len() {
        for b in &mut branches[..n] {
            *b = exponential(rng, gamma_bar);
        }
        select_snr(&branches[..n], rx, scheme)
    } else {
        let v: Vec<f64> = (0..n).map(|_| exponential(rng, gamma_bar)).collect();
        select_snr(&v, rx, scheme)
    }
}

/// `1 - eps`, re-evaluated as an upper tail only when the subtraction would
/// cancel.
fn complement(eps: f64, gamma: f64, rate: f64, beta: u32) -> f64 {
    if eps <= 0.5 {
        1.0 - eps
    } else {
        instantaneous_success(gamma, rate, beta)
    }
}

/// Per-hop random source positioned at a given trial.
struct HopStream {
    rng: ChaCha8Rng,
}

impl HopStream {
    fn at_trial(seed: u64, hop_index: usize, words_per_trial: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(hop_index as u64);
        rng.set_word_pos(u128::from(trial) * u128::from(words_per_trial));
        HopStream { rng }
    }
}

/// Per-trial draw layout: branch SNRs followed by one decision uniform,
/// each one `u64` (two 32-bit ChaCha words).
fn words_per_trial(tx: u32, rx: u32) -> u64 {
    2 * (u64::from(tx) * u64::from(rx) + 1)
}

/// Running sums of the per-trial outcome and of its complement; whichever
/// side is smaller carries the estimate without cancellation.
#[derive(Clone, Default)]
struct Tally {
    fail: ExactSum,
    fail_sq: ExactSum,
    success: ExactSum,
    success_sq: ExactSum,
    count: u64,
}

impl Tally {
    fn push(&mut self, fail: f64, success: f64) {
        self.fail.add(fail);
        self.fail_sq.add(fail * fail);
        self.success.add(success);
        self.success_sq.add(success * success);
        self.count += 1;
    }

    fn merge(mut self, other: &Tally) -> Tally {
        self.fail.merge(&other.fail);
        self.fail_sq.merge(&other.fail_sq);
        self.success.merge(&other.success);
        self.success_sq.merge(&other.success_sq);
        self.count += other.count;
        self
    }

    /// Mean, half-width and interval of the side with sums `sum`, `sum_sq`.
    fn interval(&self, sum: &ExactSum, sum_sq: &ExactSum, estimator: Estimator) -> (f64, f64, f64, f64) {
        let n = self.count as f64;
        let mean = (sum.value() / n).clamp(0.0, 1.0);
        match estimator {
            Estimator::SemiAnalytic => {
                let var = ((sum_sq.value() - n * mean * mean) / (n - 1.0)).max(0.0);
                let half = Z95 * (var / n).sqrt();
                (mean, half, (mean - half).max(0.0), (mean + half).min(1.0))
            }
            Estimator::Bernoulli => {
                let z2 = Z95 * Z95;
                let denom = 1.0 + z2 / n;
                let center = (mean + z2 / (2.0 * n)) / denom;
                let half = Z95 * (mean * (1.0 - mean) / n + z2 / (4.0 * n * n)).sqrt() / denom;
                (mean, half, (center - half).max(0.0), (center + half).min(1.0))
            }
        }
    }

    fn finish(&self, estimator: Estimator) -> McEstimate {
        let fail_side = self.fail.value() <= self.success.value();
        let (mean, half, lo, hi) = if fail_side {
            self.interval(&self.fail, &self.fail_sq, estimator)
        } else {
            self.interval(&self.success, &self.success_sq, estimator)
        };
        let (fail, success) = if fail_side {
            ((mean, lo, hi), (1.0 - mean, 1.0 - hi, 1.0 - lo))
        } else {
            ((1.0 - mean, 1.0 - hi, 1.0 - lo), (mean, lo, hi))
        };
        McEstimate {
            mean: fail.0,
            ci_halfwidth_95: half,
            ci_low: fail.1,
            ci_high: fail.2,
            success_mean: success.0,
            success_ci_low: success.1,
            success_ci_high: success.2,
            trials_used: self.count,
        }
    }
}

fn chunk_bounds(mc: &McConfig) -> Vec<(u64, u64)> {
    let chunks = mc.trials.div_ceil(mc.chunk_size);
    (0..chunks)
        .map(|c| {
            let start = c * mc.chunk_size;
            (start, (start + mc.chunk_size).min(mc.trials))
        })
        .collect()
}

fn run_chunks<F>(mc: &McConfig, body: F) -> McEstimate
where
    F: Fn(u64, u64, &mut Tally) + Sync,
{
    let tallies: Vec<Tally> = chunk_bounds(mc)
        .into_par_iter()
        .map(|(start, end)| {
            let mut tally = Tally::default();
            body(start, end, &mut tally);
            tally
        })
        .collect();
    tallies
        .iter()
        .fold(Tally::default(), |acc, t| acc.merge(t))
        .finish(mc.estimator)
}

/// Estimates the average BLER of one hop.
pub fn estimate_hop_bler(budget: &HopBudget, cfg: &SystemConfig, mc: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    mc.validate()?;
    if !(budget.avg_snr > 0.0 && budget.avg_snr.is_finite()) {
        return Err(Error::domain("gamma_bar", "must be finite and positive"));
    }
    let (tx, rx, scheme) = (cfg.tx_antennas, cfg.rx_antennas, cfg.scheme);
    let rate = coding_rate(cfg);
    let beta = cfg.blocklength;
    let words = words_per_trial(tx, rx);
    let estimator = mc.estimator;
    Ok(run_chunks(mc, |start, end, tally| {
        let mut stream = HopStream::at_trial(mc.seed, budget.hop_index, words, start);
        for _ in start..end {
            let gamma = draw_hop_snr(budget.avg_snr, tx, rx, scheme, &mut stream.rng);
            let decision = uniform(&mut stream.rng);
            let eps = instantaneous_bler(gamma, rate, beta);
            match estimator {
                Estimator::SemiAnalytic => tally.push(eps, complement(eps, gamma, rate, beta)),
                Estimator::Bernoulli => {
                    let failed = f64::from(u8::from(decision < eps));
                    tally.push(failed, 1.0 - failed);
                }
            }
        }
    }))
}

/// Estimates the end-to-end BLER of the whole route. Every hop draws an
/// independent channel per trial; the Bernoulli estimator stops at the
/// first hop that fails to decode.
pub fn estimate_e2e_bler(cfg: &SystemConfig, budgets: &[HopBudget], mc: &McConfig) -> Result<McEstimate> {
    cfg.validate()?;
    mc.validate()?;
    if budgets.is_empty() {
        return Err(Error::domain("budgets", "at least one hop is required"));
    }
    let (tx, rx, scheme) = (cfg.tx_antennas, cfg.rx_antennas, cfg.scheme);
    let rate = coding_rate(cfg);
    let beta = cfg.blocklength;
    let words = words_per_trial(tx, rx);
    let estimator = mc.estimator;
    Ok(run_chunks(mc, |start, end, tally| {
        let mut streams: Vec<HopStream> = budgets
            .iter()
            .map(|b| HopStream::at_trial(mc.seed, b.hop_index, words, start))
            .collect();
        let mut eps = vec![0.0; budgets.len()];
        let mut success = vec![0.0; budgets.len()];
        let mut decisions = vec![0.0; budgets.len()];
        for _ in start..end {
            for (h, (stream, budget)) in streams.iter_mut().zip(budgets).enumerate() {
                let gamma = draw_hop_snr(budget.avg_snr, tx, rx, scheme, &mut stream.rng);
                decisions[h] = uniform(&mut stream.rng);
                eps[h] = instantaneous_bler(gamma, rate, beta);
                success[h] = complement(eps[h], gamma, rate, beta);
            }
            match estimator {
                Estimator::SemiAnalytic => {
                    tally.push(compose_e2e(&eps).unwrap_or(1.0), success.iter().product());
                }
                Estimator::Bernoulli => {
                    let failed = f64::from(u8::from(eps.iter().zip(&decisions).any(|(e, d)| d < e)));
                    tally.push(failed, 1.0 - failed);
                }
            }
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{cdf_tas_mrc, hop_bler_quadrature, Integrand};
    use crate::fbl::build_fbl_params;
    use crate::model::build_hop_budgets;

    fn hop(avg_snr: f64) -> HopBudget {
        HopBudget {
            hop_index: 1,
            distance: 1.0,
            channel_gain: 1.0,
            avg_snr,
        }
    }

    fn cfg22() -> SystemConfig {
        SystemConfig::default()
    }

    #[test]
    fn single_branch_is_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut draws: Vec<f64> = (0..n).map(|_| draw_hop_snr(2.0, 1, 1, Scheme::TasMrc, &mut rng)).collect();
        draws.sort_by(f64::total_cmp);
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x / 2.0).exp();
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn mrc_draws_follow_closed_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| draw_hop_snr(1.0, 2, 2, Scheme::TasMrc, &mut rng)).collect();
        for g in [0.25, 0.5, 1.0, 2.0, 3.0, 5.0] {
            let f = cdf_tas_mrc(g, 1.0, 2, 2).unwrap();
            let empirical = draws.iter().filter(|&&x| x <= g).count() as f64 / n as f64;
            let sigma = (f * (1.0 - f) / n as f64).sqrt();
            assert!((empirical - f).abs() <= 3.0 * sigma, "g={g}: {empirical} vs {f}");
        }
    }

    #[test]
    fn selection_never_beats_combining() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let branches: Vec<f64> = (0..6).map(|_| exponential(&mut rng, 1.5)).collect();
            assert!(select_snr(&branches, 3, Scheme::TasSc) <= select_snr(&branches, 3, Scheme::TasMrc));
        }
    }

    #[test]
    fn hopeless_channel_is_certain_failure() {
        let mc = McConfig {
            trials: 10_000,
            chunk_size: 1000,
            ..McConfig::default()
        };
        let est = estimate_hop_bler(&hop(1e-6), &cfg22(), &mc).unwrap();
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.ci_halfwidth_95, 0.0);
    }

    #[test]
    fn chunking_does_not_change_results() {
        let base = McConfig {
            trials: 200_000,
            seed: 99,
            chunk_size: 1000,
            estimator: Estimator::SemiAnalytic,
        };
        let a = estimate_hop_bler(&hop(400.0), &cfg22(), &base).unwrap();
        let b = estimate_hop_bler(&hop(400.0), &cfg22(), &McConfig { chunk_size: 100_000, ..base }).unwrap();
        let c = estimate_hop_bler(&hop(400.0), &cfg22(), &McConfig { chunk_size: 777, ..base }).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.mean.to_bits(), c.mean.to_bits());
        assert_eq!(a.ci_halfwidth_95.to_bits(), c.ci_halfwidth_95.to_bits());
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let cfg = cfg22();
        let budgets = build_hop_budgets(&SystemConfig { avg_snr_db: 14.0, ..cfg }).unwrap();
        let mc = McConfig {
            trials: 50_000,
            seed: 5,
            chunk_size: 997,
            estimator: Estimator::SemiAnalytic,
        };
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_e2e_bler(&cfg, &budgets, &mc).unwrap());
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| estimate_e2e_bler(&cfg, &budgets, &mc).unwrap());
        assert_eq!(serial, parallel);
    }

    #[test]
    fn hop_estimate_matches_exact_q_quadrature() {
        let p = build_fbl_params(8.0, 128).unwrap();
        let b = hop(16.0 * 30.0);
        let oracle = hop_bler_quadrature(&b, &p, Scheme::TasMrc, 2, 2, Integrand::ExactQ).unwrap().value;
        let mc = McConfig {
            trials: 400_000,
            seed: 2024,
            chunk_size: 50_000,
            estimator: Estimator::SemiAnalytic,
        };
        let est = estimate_hop_bler(&b, &cfg22(), &mc).unwrap();
        assert!((est.mean - oracle).abs() <= 3.0 * est.ci_halfwidth_95, "{est:?} vs {oracle}");
    }

    #[test]
    fn single_hop_route_matches_hop_estimate() {
        let cfg = SystemConfig {
            relays: 0,
            avg_snr_db: 25.0,
            ..cfg22()
        };
        let budgets = build_hop_budgets(&cfg).unwrap();
        let mc = McConfig {
            trials: 20_000,
            chunk_size: 4096,
            ..McConfig::default()
        };
        for estimator in [Estimator::SemiAnalytic, Estimator::Bernoulli] {
            let mc = McConfig { estimator, ..mc };
            let hop_est = estimate_hop_bler(&budgets[0], &cfg, &mc).unwrap();
            let e2e_est = estimate_e2e_bler(&cfg, &budgets, &mc).unwrap();
            assert_eq!(hop_est, e2e_est);
        }
    }

    #[test]
    fn estimators_agree_and_semi_has_lower_variance() {
        let cfg = SystemConfig {
            avg_snr_db: 13.0,
            ..cfg22()
        };
        let budgets = build_hop_budgets(&cfg).unwrap();
        let mc = McConfig {
            trials: 1_000_000,
            seed: 17,
            chunk_size: 50_000,
            estimator: Estimator::SemiAnalytic,
        };
        let semi = estimate_e2e_bler(&cfg, &budgets, &mc).unwrap();
        let bern = estimate_e2e_bler(&cfg, &budgets, &McConfig { estimator: Estimator::Bernoulli, ..mc }).unwrap();
        assert!(semi.mean > 1e-3 && semi.mean < 0.5);
        assert!((semi.mean - bern.mean).abs() <= semi.ci_halfwidth_95 + bern.ci_halfwidth_95);
        assert!(semi.ci_halfwidth_95 <= bern.ci_halfwidth_95);
    }

    #[test]
    fn config_validation() {
        let ok = McConfig::default();
        assert!(ok.validate().is_ok());
        assert!(McConfig { trials: 1, chunk_size: 1, ..ok }.validate().is_err());
        assert!(McConfig { chunk_size: 0, ..ok }.validate().is_err());
        assert!(McConfig { chunk_size: ok.trials + 1, ..ok }.validate().is_ok());
        assert!(estimate_hop_bler(&hop(1.0), &cfg22(), &McConfig { trials: 1, chunk_size: 1, ..ok }).is_err());
    }
}
