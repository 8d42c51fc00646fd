//! Parameter sweeps, flat `key = value` configuration and the figure presets.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{bler_report, compare_reliability, e2e_bler_quadrature, e2e_log_success, Integrand};
use crate::asymptotic::{asymptotic_report, diversity_order_fit, TAIL_WINDOW};
use crate::error::{Error, Result};
use crate::latency::{latency_report, optimize_blocklength, optimize_relays, Objective, RetxConfig};
use crate::model::{build_hop_budgets, coding_rate, Scheme, SystemConfig};
use crate::montecarlo::{estimate_e2e_bler, Estimator, McConfig};

/// Largest grid accepted by [`parse_range`].
pub const MAX_GRID_POINTS: usize = 1_000_000;

/// Column order of the CSV output.
pub const CSV_HEADER: [&str; 16] = [
    "scheme",
    "K",
    "N_T",
    "N_R",
    "snr_db",
    "beta",
    "info_bits",
    "rate",
    "bler_analytic",
    "bler_asymptotic",
    "bler_mc_mean",
    "bler_mc_ci95",
    "latency_cu",
    "latency_ms",
    "throughput_bpcu",
    "flags",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    Blocklength,
    Relays,
    Alpha,
}

impl SweepVariable {
    /// Configuration key the variable overrides.
    pub fn key(self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "avg_snr_db",
            SweepVariable::Blocklength => "blocklength",
            SweepVariable::Relays => "relays",
            SweepVariable::Alpha => "decode_delay_factor",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, SweepVariable::Blocklength | SweepVariable::Relays)
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "snr_db" | "snr-db" | "snr" | "avg_snr_db" => Ok(SweepVariable::SnrDb),
            "beta" | "blocklength" => Ok(SweepVariable::Blocklength),
            "K" | "k" | "relays" => Ok(SweepVariable::Relays),
            "alpha" | "decode_delay_factor" => Ok(SweepVariable::Alpha),
            other => Err(Error::domain("variable", format!("unknown sweep variable `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Output {
    Analytic,
    Asymptotic,
    MonteCarlo,
    Latency,
    Throughput,
}

impl Output {
    pub const ALL: [Output; 5] = [
        Output::Analytic,
        Output::Asymptotic,
        Output::MonteCarlo,
        Output::Latency,
        Output::Throughput,
    ];
}

impl FromStr for Output {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "analytic" => Ok(Output::Analytic),
            "asymptotic" => Ok(Output::Asymptotic),
            "monte_carlo" | "monte-carlo" | "mc" => Ok(Output::MonteCarlo),
            "latency" => Ok(Output::Latency),
            "throughput" => Ok(Output::Throughput),
            other => Err(Error::domain("outputs", format!("unknown output `{other}`"))),
        }
    }
}

/// Route used for the `bler_analytic` column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnalyticPath {
    ClosedForm,
    Quadrature(Integrand),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub system: SystemConfig,
    pub retx: RetxConfig,
    pub mc: McConfig,
    pub outputs: BTreeSet<Output>,
    pub analytic_path: AnalyticPath,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, grid: Vec<f64>, resolved: &Resolved, outputs: BTreeSet<Output>) -> Self {
        SweepSpec {
            variable,
            grid,
            schemes: resolved.schemes.clone(),
            system: resolved.system,
            retx: resolved.retx,
            mc: resolved.mc,
            outputs,
            analytic_path: AnalyticPath::ClosedForm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outputs.is_empty() {
            return Err(Error::domain("outputs", "at least one output must be requested"));
        }
        if self.schemes.is_empty() {
            return Err(Error::domain("scheme", "at least one scheme must be selected"));
        }
        if self.grid.is_empty() {
            return Err(Error::domain("grid", "sweep grid is empty"));
        }
        if let Some(v) = self.grid.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain("grid", format!("non-finite grid value {v}")));
        }
        if self.grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("grid", "values must be strictly increasing"));
        }
        if self.variable.is_integer() {
            if let Some(v) = self.grid.iter().find(|v| v.fract() != 0.0 || **v < 0.0 || **v > f64::from(u32::MAX)) {
                return Err(Error::domain("grid", format!("{} takes non-negative integers, got {v}", self.variable.key())));
            }
        }
        if self.outputs.contains(&Output::MonteCarlo) {
            self.mc.validate()?;
        }
        self.retx.validate()?;
        for &v in &self.grid {
            let (cfg, retx) = self.point(self.schemes[0], v);
            cfg.validate()?;
            retx.validate()?;
        }
        Ok(())
    }

    fn point(&self, scheme: Scheme, value: f64) -> (SystemConfig, RetxConfig) {
        let mut cfg = SystemConfig { scheme, ..self.system };
        let mut retx = self.retx;
        match self.variable {
            SweepVariable::SnrDb => cfg.avg_snr_db = value,
            SweepVariable::Blocklength => cfg.blocklength = value as u32,
            SweepVariable::Relays => cfg.relays = value as u32,
            SweepVariable::Alpha => retx.decode_delay_factor = value,
        }
        (cfg, retx)
    }

    fn wants(&self, output: Output) -> bool {
        self.outputs.contains(&output)
    }
}

/// One evaluated grid point. `system` and `retx` echo the full resolved
/// configuration behind the row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub scheme: Scheme,
    pub system: SystemConfig,
    pub retx: RetxConfig,
    pub rate: f64,
    pub bler_analytic: Option<f64>,
    pub bler_asymptotic: Option<f64>,
    pub bler_mc_mean: Option<f64>,
    pub bler_mc_ci95: Option<f64>,
    pub latency_cu: Option<f64>,
    pub latency_ms: Option<f64>,
    pub throughput_bpcu: Option<f64>,
    pub flags: Vec<String>,
}

impl SweepRow {
    /// True when some requested quantity failed numerically.
    pub fn has_numeric_error(&self) -> bool {
        self.flags.iter().any(|f| f.starts_with("numeric-error"))
    }

    /// Fields in [`CSV_HEADER`] order.
    pub fn csv_record(&self) -> Vec<String> {
        let s = &self.system;
        let opt = |v: Option<f64>| v.map(format_number).unwrap_or_default();
        vec![
            self.scheme.label().to_string(),
            s.relays.to_string(),
            s.tx_antennas.to_string(),
            s.rx_antennas.to_string(),
            format_number(s.avg_snr_db),
            s.blocklength.to_string(),
            s.info_bits.to_string(),
            format_number(self.rate),
            opt(self.bler_analytic),
            opt(self.bler_asymptotic),
            opt(self.bler_mc_mean),
            opt(self.bler_mc_ci95),
            opt(self.latency_cu),
            opt(self.latency_ms),
            opt(self.throughput_bpcu),
            self.flags.join(";"),
        ]
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn annotate<T>(flags: &mut Vec<String>, what: &str, r: Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            flags.push(format!("numeric-error({what}): {e}"));
            None
        }
    }
}

fn evaluate_point(spec: &SweepSpec, scheme: Scheme, value: f64) -> SweepRow {
    let (cfg, retx) = spec.point(scheme, value);
    let mut flags: Vec<String> = cfg
        .validate()
        .map(|f| f.iter().map(|c| c.label().to_string()).collect())
        .unwrap_or_default();
    let mut row = SweepRow {
        scheme,
        system: cfg,
        retx,
        rate: coding_rate(&cfg),
        bler_analytic: None,
        bler_asymptotic: None,
        bler_mc_mean: None,
        bler_mc_ci95: None,
        latency_cu: None,
        latency_ms: None,
        throughput_bpcu: None,
        flags: Vec::new(),
    };
    let needs_report = spec.wants(Output::Analytic) || spec.wants(Output::Latency) || spec.wants(Output::Throughput);
    let report = if needs_report {
        annotate(&mut flags, "analytic", bler_report(&cfg))
    } else {
        None
    };
    if report.as_ref().is_some_and(|r| r.per_hop.iter().any(|h| h.clamped)) {
        flags.push("clamped".to_string());
    }
    if spec.wants(Output::Analytic) {
        row.bler_analytic = match spec.analytic_path {
            AnalyticPath::ClosedForm => report.as_ref().map(|r| r.e2e),
            AnalyticPath::Quadrature(integrand) => {
                annotate(&mut flags, "quadrature", e2e_bler_quadrature(&cfg, integrand))
            }
        };
    }
    if spec.wants(Output::Asymptotic) {
        row.bler_asymptotic = annotate(&mut flags, "asymptotic", asymptotic_report(&cfg)).map(|a| a.e2e_asym);
    }
    if spec.wants(Output::MonteCarlo) {
        let est = build_hop_budgets(&cfg).and_then(|b| estimate_e2e_bler(&cfg, &b, &spec.mc));
        if let Some(est) = annotate(&mut flags, "monte-carlo", est) {
            row.bler_mc_mean = Some(est.mean);
            row.bler_mc_ci95 = Some(est.ci_halfwidth_95);
            if let Some(a) = row.bler_analytic {
                // Near one the comparison runs on the success probability,
                // which both sides resolve without rounding to 1.
                let hit = if a < 0.5 {
                    Some(est.contains(a))
                } else {
                    let integrand = match spec.analytic_path {
                        AnalyticPath::ClosedForm => Integrand::Psi,
                        AnalyticPath::Quadrature(i) => i,
                    };
                    annotate(&mut flags, "success quadrature", e2e_log_success(&cfg, integrand))
                        .map(|ln| est.contains_success(ln.exp()))
                };
                if let Some(hit) = hit {
                    flags.push(if hit { "mc-ci-hit" } else { "mc-ci-miss" }.to_string());
                }
            }
        }
    }
    if spec.wants(Output::Latency) || spec.wants(Output::Throughput) {
        if let Some(report) = report.as_ref() {
            if let Some(lt) = annotate(&mut flags, "latency", latency_report(report, &retx)) {
                if spec.wants(Output::Latency) {
                    row.latency_cu = Some(lt.latency_cu);
                    row.latency_ms = Some(lt.latency_ms);
                }
                if spec.wants(Output::Throughput) {
                    row.throughput_bpcu = Some(lt.throughput);
                }
            }
        }
    }
    row.flags = flags;
    row
}

/// Evaluates every grid point for every scheme. Rows come out grid-major,
/// schemes in the order given. Numeric failures are recorded in the row's
/// flags instead of aborting the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points: Vec<(f64, Scheme)> = spec
        .grid
        .iter()
        .flat_map(|&v| spec.schemes.iter().map(move |&s| (v, s)))
        .collect();
    Ok(points
        .par_iter()
        .map(|&(v, s)| evaluate_point(spec, s, v))
        .collect())
}

/// Parses `start:stop:step` (inclusive of `stop` up to rounding) or a single
/// number.
pub fn parse_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').map(str::trim).collect();
    let num = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::domain("range", format!("`{s}` is not a finite number")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, stop, step] => {
            let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
            if !(step > 0.0) {
                return Err(Error::domain("range", "step must be positive"));
            }
            if stop < start {
                return Err(Error::domain("range", "stop must not be below start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > MAX_GRID_POINTS {
                return Err(Error::domain("range", format!("{count} points exceed the limit of {MAX_GRID_POINTS}")));
            }
            Ok((0..count).map(|i| start + i as f64 * step).collect())
        }
        _ => Err(Error::domain("range", format!("expected start:stop:step, got `{text}`"))),
    }
}

/// Parses `tas-mrc`, `tas-sc` or `both`.
pub fn parse_schemes(text: &str) -> Result<Vec<Scheme>> {
    if text.trim().eq_ignore_ascii_case("both") {
        Ok(Scheme::ALL.to_vec())
    } else {
        Ok(vec![text.parse()?])
    }
}

/// Recognized configuration keys: the field names of [`SystemConfig`],
/// [`RetxConfig`] and [`McConfig`].
pub const CONFIG_KEYS: [&str; 17] = [
    "relays",
    "tx_antennas",
    "rx_antennas",
    "info_bits",
    "blocklength",
    "pathloss_exponent",
    "total_distance",
    "avg_snr_db",
    "scheme",
    "max_retx",
    "feedback_delay",
    "decode_delay_factor",
    "cu_duration_us",
    "trials",
    "seed",
    "estimator",
    "chunk_size",
];

/// Fully resolved parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub system: SystemConfig,
    pub retx: RetxConfig,
    pub mc: McConfig,
    pub schemes: Vec<Scheme>,
}

impl Default for Resolved {
    fn default() -> Self {
        Resolved {
            system: SystemConfig::default(),
            retx: RetxConfig::default(),
            mc: McConfig::default(),
            schemes: vec![Scheme::TasMrc],
        }
    }
}

/// Explicitly set parameter values, keyed by field name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    entries: BTreeMap<&'static str, String>,
}

impl Overrides {
    /// Parses flat `key = value` text. Blank lines and `#` comments are
    /// ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = Overrides::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::domain("config", format!("line {}: expected `key = value`", n + 1)))?;
            let key = canonical_key(key.trim()).map_err(|_| {
                Error::domain("config", format!("line {}: unknown key `{}`", n + 1, key.trim()))
            })?;
            if out.entries.insert(key, value.trim().to_string()).is_some() {
                return Err(Error::domain("config", format!("line {}: duplicate key `{key}`", n + 1)));
            }
        }
        Ok(out)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        let key = canonical_key(key)?;
        self.entries.insert(key, value.into());
        Ok(())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Entries of `higher` take precedence over ours.
    pub fn merged_with(&self, higher: &Overrides) -> Overrides {
        let mut entries = self.entries.clone();
        entries.extend(higher.entries.iter().map(|(k, v)| (*k, v.clone())));
        Overrides { entries }
    }

    /// Applies the entries on top of `base`.
    pub fn resolve(&self, base: &Resolved) -> Result<Resolved> {
        let mut r = base.clone();
        for (&key, value) in &self.entries {
            apply(&mut r, key, value)?;
        }
        Ok(r)
    }
}

fn canonical_key(key: &str) -> Result<&'static str> {
    CONFIG_KEYS
        .iter()
        .copied()
        .find(|k| *k == key)
        .ok_or_else(|| Error::domain("config", format!("unknown key `{key}`")))
}

fn parse_value<T: FromStr>(field: &'static str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::domain(field, format!("cannot parse `{value}`")))
}

fn apply(r: &mut Resolved, key: &'static str, value: &str) -> Result<()> {
    match key {
        "relays" => r.system.relays = parse_value(key, value)?,
        "tx_antennas" => r.system.tx_antennas = parse_value(key, value)?,
        "rx_antennas" => r.system.rx_antennas = parse_value(key, value)?,
        "info_bits" => r.system.info_bits = parse_value(key, value)?,
        "blocklength" => r.system.blocklength = parse_value(key, value)?,
        "pathloss_exponent" => r.system.pathloss_exponent = parse_value(key, value)?,
        "total_distance" => r.system.total_distance = parse_value(key, value)?,
        "avg_snr_db" => r.system.avg_snr_db = parse_value(key, value)?,
        "scheme" => {
            r.schemes = parse_schemes(value)?;
            r.system.scheme = r.schemes[0];
        }
        "max_retx" => r.retx.max_retx = parse_value(key, value)?,
        "feedback_delay" => r.retx.feedback_delay = parse_value(key, value)?,
        "decode_delay_factor" => r.retx.decode_delay_factor = parse_value(key, value)?,
        "cu_duration_us" => r.retx.cu_duration_us = parse_value(key, value)?,
        "trials" => r.mc.trials = parse_value(key, value)?,
        "seed" => r.mc.seed = parse_value(key, value)?,
        "estimator" => r.mc.estimator = value.parse::<Estimator>()?,
        "chunk_size" => r.mc.chunk_size = parse_value(key, value)?,
        _ => unreachable!("canonical_key admitted `{key}`"),
    }
    Ok(())
}

/// Rejects a sweep whose variable is also pinned to a single value.
pub fn check_not_pinned(variable: SweepVariable, overrides: &Overrides) -> Result<()> {
    if overrides.contains(variable.key()) {
        return Err(Error::domain(
            "variable",
            format!("`{}` is swept and cannot also be fixed", variable.key()),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    Fig2,
    Fig3,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
}

impl Figure {
    pub const ALL: [Figure; 6] = [Figure::Fig2, Figure::Fig3, Figure::Fig5, Figure::Fig6, Figure::Fig7, Figure::Fig8];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
            Figure::Fig8 => "fig8",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::domain("figure", format!("unknown figure `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryItem {
    pub key: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureOutput {
    pub figure: Figure,
    pub rows: Vec<SweepRow>,
    pub summary: Vec<SummaryItem>,
}

/// SNR axis shared by the BLER-versus-SNR presets.
pub const FIGURE_SNR_DB: (f64, f64, f64) = (-10.0, 30.0, 1.0);
/// Blocklength axis of the fig5 preset.
pub const FIG5_BETAS: (u32, u32, u32) = (100, 1000, 10);
/// Blocklength axis of the fig7 preset.
pub const FIG7_BETAS: (u32, u32, u32) = (200, 800, 10);
/// Relay counts of the fig8 preset.
pub const FIG8_RELAYS: (u32, u32) = (0, 9);
/// Decoding delay factors of the fig6 preset.
pub const FIG6_ALPHAS: (f64, f64, f64) = (0.0, 5.0, 0.5);

fn snr_axis() -> Vec<f64> {
    let (a, b, s) = FIGURE_SNR_DB;
    parse_range(&format!("{a}:{b}:{s}")).expect("static axis")
}

fn int_axis(start: u32, stop: u32, step: u32) -> Vec<f64> {
    (start..=stop).step_by(step as usize).map(f64::from).collect()
}

fn summary(items: &mut Vec<SummaryItem>, key: impl Into<String>, value: impl fmt::Display) {
    items.push(SummaryItem {
        key: key.into(),
        value: value.to_string(),
    });
}

fn outputs(list: &[Output]) -> BTreeSet<Output> {
    list.iter().copied().collect()
}

/// Common parameters of the figure presets (`T = 1024` bits, `L = 20`,
/// `F = 40` CUs, 3 us channel uses).
pub fn figure_base() -> Resolved {
    Resolved {
        system: SystemConfig {
            info_bits: 1024,
            blocklength: 128,
            ..SystemConfig::default()
        },
        retx: RetxConfig::default(),
        mc: McConfig::default(),
        schemes: Scheme::ALL.to_vec(),
    }
}

fn column(rows: &[SweepRow], scheme: Scheme, f: impl Fn(&SweepRow) -> Option<f64>) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.scheme == scheme)
        .filter_map(|r| f(r).map(|v| (r.system.avg_snr_db, v)))
        .collect()
}

fn tail_diversity(points: &[(f64, f64)]) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(_, b)| (TAIL_WINDOW.0..=TAIL_WINDOW.1).contains(b))
        .copied()
        .unzip();
    diversity_order_fit(&xs, &ys).ok()
}

/// Runs a preset. When `mc` is given, Monte Carlo estimates are added to the
/// BLER presets.
pub fn run_figure(figure: Figure, mc: Option<McConfig>) -> Result<FigureOutput> {
    let mut base = figure_base();
    if let Some(mc) = mc {
        base.mc = mc;
    }
    let mut bler_outputs = vec![Output::Analytic, Output::Asymptotic];
    if mc.is_some() {
        bler_outputs.push(Output::MonteCarlo);
    }
    let mut rows = Vec::new();
    let mut items = Vec::new();
    match figure {
        Figure::Fig2 => {
            base.system.tx_antennas = 2;
            base.system.rx_antennas = 2;
            for k in 1..=3 {
                base.system.relays = k;
                let spec = SweepSpec::new(SweepVariable::SnrDb, snr_axis(), &base, outputs(&bler_outputs));
                let part = run_sweep(&spec)?;
                for scheme in Scheme::ALL {
                    if let Some(d) = tail_diversity(&column(&part, scheme, |r| r.bler_analytic)) {
                        summary(&mut items, format!("{scheme} K={k} diversity_fit"), format!("{d:.4}"));
                    }
                }
                rows.extend(part);
            }
        }
        Figure::Fig3 => {
            base.system.relays = 3;
            for (nt, nr) in [(1, 1), (2, 2), (2, 4), (4, 2)] {
                base.system.tx_antennas = nt;
                base.system.rx_antennas = nr;
                let spec = SweepSpec::new(SweepVariable::SnrDb, snr_axis(), &base, outputs(&bler_outputs));
                rows.extend(run_sweep(&spec)?);
            }
            let pick = |scheme, nt, nr| -> Vec<f64> {
                rows.iter()
                    .filter(|r| r.scheme == scheme && r.system.tx_antennas == nt && r.system.rx_antennas == nr)
                    .filter_map(|r| r.bler_analytic)
                    .collect()
            };
            let (a, b) = (pick(Scheme::TasSc, 2, 4), pick(Scheme::TasSc, 4, 2));
            let diff = a
                .iter()
                .zip(&b)
                .map(|(x, y)| if x == y { 0.0 } else { ((x - y) / y).abs() })
                .fold(0.0, f64::max);
            summary(&mut items, "tas-sc 2x4 vs 4x2 max_rel_diff", format_number(diff));
            let layout = |nt, nr, db| SystemConfig {
                scheme: Scheme::TasMrc,
                tx_antennas: nt,
                rx_antennas: nr,
                avg_snr_db: db,
                ..base.system
            };
            let mut better = true;
            for db in snr_axis() {
                better &= compare_reliability(&layout(2, 4, db), &layout(4, 2, db))? == Ordering::Less;
            }
            summary(&mut items, "tas-mrc 2x4 better than 4x2 everywhere", better);
        }
        Figure::Fig5 => {
            base.system.relays = 3;
            base.system.tx_antennas = 2;
            base.system.rx_antennas = 3;
            base.system.avg_snr_db = 0.0;
            let (a, b, s) = FIG5_BETAS;
            let spec = SweepSpec::new(SweepVariable::Blocklength, int_axis(a, b, s), &base, outputs(&bler_outputs));
            rows = run_sweep(&spec)?;
            for scheme in Scheme::ALL {
                let beta = rows
                    .iter()
                    .filter(|r| r.scheme == scheme)
                    .find(|r| r.bler_analytic.is_some_and(|v| v <= 1e-5))
                    .map(|r| r.system.blocklength.to_string())
                    .unwrap_or_else(|| "none".to_string());
                summary(&mut items, format!("{scheme} smallest_beta_bler_le_1e-5"), beta);
            }
        }
        Figure::Fig6 => {
            base.system.tx_antennas = 3;
            base.system.rx_antennas = 3;
            base.system.avg_snr_db = 10.0;
            let (a, b, s) = FIG6_ALPHAS;
            let lt = outputs(&[Output::Analytic, Output::Latency, Output::Throughput]);
            for k in [3, 5] {
                base.system.relays = k;
                let spec = SweepSpec::new(SweepVariable::Alpha, parse_range(&format!("{a}:{b}:{s}"))?, &base, lt.clone());
                let part = run_sweep(&spec)?;
                let lat = |scheme| -> Vec<f64> {
                    part.iter().filter(|r| r.scheme == scheme).filter_map(|r| r.latency_cu).collect()
                };
                let (m, c) = (lat(Scheme::TasMrc), lat(Scheme::TasSc));
                let gap = m.iter().zip(&c).map(|(x, y)| ((x - y) / y).abs()).fold(0.0, f64::max);
                summary(&mut items, format!("K={k} max_rel_latency_gap_mrc_vs_sc"), format_number(gap));
                rows.extend(part);
            }
        }
        Figure::Fig7 => {
            base.system.relays = 5;
            base.system.tx_antennas = 3;
            base.system.rx_antennas = 3;
            base.system.avg_snr_db = -10.0;
            let (a, b, s) = FIG7_BETAS;
            let grid: Vec<u32> = (a..=b).step_by(s as usize).collect();
            let spec = SweepSpec::new(
                SweepVariable::Blocklength,
                grid.iter().map(|&g| f64::from(g)).collect(),
                &base,
                outputs(&[Output::Analytic, Output::Latency, Output::Throughput]),
            );
            rows = run_sweep(&spec)?;
            for scheme in Scheme::ALL {
                let template = SystemConfig { scheme, ..base.system };
                let lat = optimize_blocklength(&template, &base.retx, &grid, Objective::MinLatency)?;
                let thr = optimize_blocklength(&template, &base.retx, &grid, Objective::MaxThroughput)?;
                summary(&mut items, format!("{scheme} beta_min_latency"), lat.best);
                summary(&mut items, format!("{scheme} min_latency_cu"), format_number(lat.report.latency_cu));
                summary(&mut items, format!("{scheme} beta_max_throughput"), thr.best);
                summary(&mut items, format!("{scheme} max_throughput_bpcu"), format_number(thr.report.throughput));
            }
        }
        Figure::Fig8 => {
            base.system.tx_antennas = 3;
            base.system.rx_antennas = 3;
            base.system.avg_snr_db = 15.0;
            let (a, b) = FIG8_RELAYS;
            let grid: Vec<u32> = (a..=b).collect();
            let spec = SweepSpec::new(
                SweepVariable::Relays,
                grid.iter().map(|&g| f64::from(g)).collect(),
                &base,
                outputs(&[Output::Analytic, Output::Latency, Output::Throughput]),
            );
            rows = run_sweep(&spec)?;
            for scheme in Scheme::ALL {
                let template = SystemConfig { scheme, ..base.system };
                let lat = optimize_relays(&template, &base.retx, &grid, Objective::MinLatency)?;
                let thr = optimize_relays(&template, &base.retx, &grid, Objective::MaxThroughput)?;
                summary(&mut items, format!("{scheme} K_min_latency"), lat.best);
                summary(&mut items, format!("{scheme} K_max_throughput"), thr.best);
                summary(&mut items, format!("{scheme} min_latency_cu"), format!("{:.2}", lat.report.latency_cu));
                summary(&mut items, format!("{scheme} min_latency_ms"), format!("{:.2}", lat.report.latency_ms));
            }
        }
    }
    Ok(FigureOutput {
        figure,
        rows,
        summary: items,
    })
}

impl FigureOutput {
    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|s| s.key == key).map(|s| s.value.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(variable: SweepVariable, grid: Vec<f64>, outs: &[Output]) -> SweepSpec {
        SweepSpec::new(variable, grid, &Resolved::default(), outputs(outs))
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:10:2").unwrap(), vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0]);
        assert_eq!(parse_range("-5:5:2.5").unwrap(), vec![-5.0, -2.5, 0.0, 2.5, 5.0]);
        assert_eq!(parse_range("3").unwrap(), vec![3.0]);
        assert_eq!(parse_range("0:1:0.1").unwrap().len(), 11);
        for bad in ["0:10", "0:10:0", "10:0:1", "a:1:1", "0:1:-1", "0:1e9:1e-3"] {
            assert!(parse_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn spec_validation() {
        assert!(spec(SweepVariable::SnrDb, vec![0.0, 1.0], &[]).validate().is_err());
        assert!(spec(SweepVariable::SnrDb, vec![], &[Output::Analytic]).validate().is_err());
        assert!(spec(SweepVariable::SnrDb, vec![1.0, 1.0], &[Output::Analytic]).validate().is_err());
        assert!(spec(SweepVariable::SnrDb, vec![2.0, 1.0], &[Output::Analytic]).validate().is_err());
        assert!(spec(SweepVariable::Blocklength, vec![100.5], &[Output::Analytic]).validate().is_err());
        assert!(spec(SweepVariable::Blocklength, vec![0.0], &[Output::Analytic]).validate().is_err());
        assert!(spec(SweepVariable::Alpha, vec![-1.0], &[Output::Latency]).validate().is_err());
        assert!(spec(SweepVariable::Relays, vec![0.0, 4.0], &[Output::Analytic]).validate().is_ok());
    }

    #[test]
    fn rows_follow_grid_order_and_echo_config() {
        let mut s = spec(SweepVariable::SnrDb, vec![0.0, 5.0, 10.0], &Output::ALL);
        s.schemes = Scheme::ALL.to_vec();
        s.mc.trials = 2000;
        s.mc.chunk_size = 500;
        let rows = run_sweep(&s).unwrap();
        assert_eq!(rows.len(), 6);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.system.avg_snr_db, s.grid[i / 2]);
            assert_eq!(r.scheme, Scheme::ALL[i % 2]);
            assert!(r.bler_analytic.is_some() && r.bler_mc_mean.is_some() && r.throughput_bpcu.is_some());
            assert_eq!(r.csv_record().len(), CSV_HEADER.len());
        }
        assert_eq!(rows, run_sweep(&s).unwrap());
    }

    #[test]
    fn short_blocks_are_flagged() {
        let rows = run_sweep(&spec(SweepVariable::Blocklength, vec![64.0, 128.0], &[Output::Analytic])).unwrap();
        assert_eq!(rows[0].flags, vec!["short-blocklength".to_string()]);
        assert!(rows[1].flags.is_empty());
    }

    #[test]
    fn config_text_round_trip() {
        let text = "# reference\nrelays = 2\nscheme = both\navg_snr_db = 7.5  # trailing\n\nestimator = bernoulli\n";
        let o = Overrides::parse(text).unwrap();
        let r = o.resolve(&Resolved::default()).unwrap();
        assert_eq!(r.system.relays, 2);
        assert_eq!(r.schemes, Scheme::ALL.to_vec());
        assert_eq!(r.system.avg_snr_db, 7.5);
        assert_eq!(r.mc.estimator, Estimator::Bernoulli);
        let mut cli = Overrides::default();
        cli.set("relays", "4").unwrap();
        assert_eq!(o.merged_with(&cli).resolve(&Resolved::default()).unwrap().system.relays, 4);
        assert!(check_not_pinned(SweepVariable::Relays, &o).is_err());
        assert!(check_not_pinned(SweepVariable::Blocklength, &o).is_ok());
    }

    #[test]
    fn config_errors() {
        assert!(Overrides::parse("bogus = 1").is_err());
        assert!(Overrides::parse("relays 1").is_err());
        assert!(Overrides::parse("relays = 1\nrelays = 2").is_err());
        let o = Overrides::parse("relays = -1").unwrap();
        assert!(o.resolve(&Resolved::default()).is_err());
        assert!(parse_schemes("tas-xx").is_err());
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(8.0), "8");
        assert_eq!(format_number(0.25), "0.25");
        assert_eq!(format_number(1.5e-7), "1.5e-7");
        assert_eq!(format_number(-2.5), "-2.5");
    }
}
