//! Acceptance criteria 1-11. Each test reports one `criterion N: PASS|FAIL`
//! line on stderr (bypassing the harness capture) before asserting.

use std::cmp::Ordering;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use fblrelay_core::analytic::{compare_reliability, hop_bler_closed_form, hop_bler_quadrature};
use fblrelay_core::asymptotic::{asymptote_crossing_db, asymptotic_report, closed_form_diversity, snr_gap_db};
use fblrelay_core::experiments::{
    parse_range, run_figure, run_sweep, AnalyticPath, Figure, FigureOutput, Output, Resolved, SweepRow, SweepSpec,
    SweepVariable,
};
use fblrelay_core::latency::{e2e_latency, e2e_throughput, RetxConfig};
use fblrelay_core::model::db_to_linear;
use fblrelay_core::{bler_report, build_fbl_params, Estimator, HopBudget, Integrand, McConfig, Scheme, SystemConfig};

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {criterion}: {verdict} ({detail})");
    assert!(pass, "criterion {criterion} failed: {detail}");
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

#[test]
fn criterion_01_closed_form_matches_quadrature() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for (info_bits, beta) in [(1024u32, 128u32), (256, 256)] {
        let p = build_fbl_params(f64::from(info_bits) / f64::from(beta), beta).unwrap();
        for nt in 1..=4 {
            for nr in 1..=4 {
                for db in [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0] {
                    let hop = HopBudget {
                        hop_index: 1,
                        distance: 1.0,
                        channel_gain: 1.0,
                        avg_snr: db_to_linear(db),
                    };
                    for scheme in Scheme::ALL {
                        let closed = hop_bler_closed_form(&hop, &p, scheme, nt, nr).unwrap().value;
                        let quad = hop_bler_quadrature(&hop, &p, scheme, nt, nr, Integrand::Psi).unwrap().value;
                        let rel = if quad == closed { 0.0 } else { ((closed - quad) / quad).abs() };
                        worst = worst.max(rel);
                        points += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    report(
        1,
        worst <= 1e-9 && elapsed < Duration::from_secs(10),
        &format!("{points} points, worst relative error {worst:.2e}, {elapsed:.2?}"),
    );
}

#[test]
fn criterion_02_monte_carlo_agreement() {
    let start = Instant::now();
    let mut base = Resolved {
        schemes: Scheme::ALL.to_vec(),
        ..Resolved::default()
    };
    base.mc = McConfig {
        trials: 1_000_000,
        seed: 42,
        estimator: Estimator::SemiAnalytic,
        chunk_size: 10_000,
    };
    let mut spec = SweepSpec::new(
        SweepVariable::SnrDb,
        parse_range("0:20:1").unwrap(),
        &base,
        [Output::Analytic, Output::MonteCarlo].into_iter().collect(),
    );
    spec.analytic_path = AnalyticPath::Quadrature(Integrand::ExactQ);
    let rows = run_sweep(&spec).unwrap();
    let elapsed = start.elapsed();
    let scored: Vec<_> = rows.iter().filter(|r| r.bler_analytic.unwrap() >= 1e-4).collect();
    let hit = |r: &SweepRow| r.flags.iter().any(|f| f == "mc-ci-hit");
    let hits = scored.iter().filter(|r| hit(r)).count();
    let coverage = hits as f64 / scored.len() as f64;
    // Points whose success probability is below 1/trials cannot be resolved
    // by 1e6 draws; report them separately for diagnosis.
    let resolvable: Vec<_> = scored
        .iter()
        .filter(|r| 1.0 - r.bler_analytic.unwrap() >= 1.0 / base.mc.trials as f64)
        .collect();
    let resolvable_hits = resolvable.iter().filter(|r| hit(r)).count();
    report(
        2,
        coverage >= 0.9 && elapsed < Duration::from_secs(120),
        &format!(
            "{hits}/{} points inside the 95% CI ({:.1}%), {elapsed:.2?}; \
             {resolvable_hits}/{} where 1 - BLER >= 1/trials",
            scored.len(),
            100.0 * coverage,
            resolvable.len()
        ),
    );
}

#[test]
fn criterion_03_diversity_order() {
    let grid = parse_range("0:100:0.25").unwrap();
    let mut worst: f64 = 0.0;
    let mut fits = Vec::new();
    for (nt, nr) in [(1, 1), (2, 2), (2, 3), (3, 2)] {
        for scheme in Scheme::ALL {
            let cfg = SystemConfig {
                tx_antennas: nt,
                rx_antennas: nr,
                scheme,
                ..SystemConfig::default()
            };
            let d = closed_form_diversity(&cfg, &grid).unwrap();
            let target = f64::from(nt * nr);
            worst = worst.max(((d - target) / target).abs());
            fits.push(format!("{scheme} {nt}x{nr}={d:.3}"));
        }
    }
    report(3, worst <= 0.05, &format!("worst deviation {:.2}%; {}", 100.0 * worst, fits.join(", ")));
}

#[test]
fn criterion_04_bler_loss_ratio() {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (nt, nr) in [(2, 2), (2, 3), (3, 2)] {
        let e2e = |db: f64, scheme| {
            bler_report(&SystemConfig {
                tx_antennas: nt,
                rx_antennas: nr,
                avg_snr_db: db,
                scheme,
                ..SystemConfig::default()
            })
            .unwrap()
            .e2e
        };
        let (mut lo, mut hi) = (-20.0, 80.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if e2e(mid, Scheme::TasMrc) > 1e-8 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let db = 0.5 * (lo + hi);
        let ratio = e2e(db, Scheme::TasSc) / e2e(db, Scheme::TasMrc);
        let target = factorial(nr).powi(nt as i32);
        worst = worst.max(((ratio - target) / target).abs());
        parts.push(format!("{nt}x{nr} at {db:.2} dB: {ratio:.3} vs {target}"));
    }
    report(4, worst <= 0.10, &format!("worst deviation {:.2}%; {}", 100.0 * worst, parts.join(", ")));
}

#[test]
fn criterion_05_snr_gap() {
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (nt, nr) in [(2, 2), (3, 2), (2, 3), (3, 3)] {
        let cfg = |scheme| SystemConfig {
            tx_antennas: nt,
            rx_antennas: nr,
            avg_snr_db: 20.0,
            scheme,
            ..SystemConfig::default()
        };
        let mrc = asymptotic_report(&cfg(Scheme::TasMrc)).unwrap();
        let sc = asymptotic_report(&cfg(Scheme::TasSc)).unwrap();
        let gap = asymptote_crossing_db(&sc, 1e-6) - asymptote_crossing_db(&mrc, 1e-6);
        worst = worst.max((gap - snr_gap_db(nr)).abs());
        parts.push(format!("{nt}x{nr}: {gap:.4} dB"));
    }
    let expected_ok = (snr_gap_db(2) - 1.5051).abs() < 1e-4 && (snr_gap_db(3) - 2.594).abs() < 1e-3;
    report(
        5,
        worst <= 0.05 && expected_ok,
        &format!("worst deviation {worst:.2e} dB; {}", parts.join(", ")),
    );
}

#[test]
fn criterion_06_tas_sc_symmetry() {
    let grid = parse_range("-10:30:1").unwrap();
    let mut worst: f64 = 0.0;
    let mut mrc_better = true;
    for &db in &grid {
        let cfg = |scheme, nt, nr| SystemConfig {
            tx_antennas: nt,
            rx_antennas: nr,
            avg_snr_db: db,
            scheme,
            ..SystemConfig::default()
        };
        let a = bler_report(&cfg(Scheme::TasSc, 2, 4)).unwrap().e2e;
        let b = bler_report(&cfg(Scheme::TasSc, 4, 2)).unwrap().e2e;
        if a != b {
            worst = worst.max(((a - b) / b).abs());
        }
        mrc_better &= compare_reliability(&cfg(Scheme::TasMrc, 2, 4), &cfg(Scheme::TasMrc, 4, 2)).unwrap() == Ordering::Less;
    }
    report(
        6,
        worst <= 1e-12 && mrc_better,
        &format!("TAS/SC max relative difference {worst:.1e}; TAS/MRC 2x4 strictly better at all {} SNRs: {mrc_better}", grid.len()),
    );
}

fn summary_u32(out: &FigureOutput, key: &str) -> u32 {
    out.summary_value(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

fn summary_f64(out: &FigureOutput, key: &str) -> f64 {
    out.summary_value(key).unwrap_or_else(|| panic!("missing {key}")).parse().unwrap()
}

#[test]
fn criterion_07_fig5_blocklength() {
    let out = run_figure(Figure::Fig5, None).unwrap();
    let mrc = summary_u32(&out, "tas-mrc smallest_beta_bler_le_1e-5");
    let sc = summary_u32(&out, "tas-sc smallest_beta_bler_le_1e-5");
    report(
        7,
        mrc.abs_diff(460) <= 20 && sc.abs_diff(650) <= 20,
        &format!("beta = {mrc} (TAS/MRC), {sc} (TAS/SC)"),
    );
}

#[test]
fn criterion_08_fig7_optimal_blocklength() {
    let out = run_figure(Figure::Fig7, None).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (scheme, target) in [(Scheme::TasMrc, 330), (Scheme::TasSc, 420)] {
        for objective in ["beta_min_latency", "beta_max_throughput"] {
            let beta = summary_u32(&out, &format!("{scheme} {objective}"));
            pass &= beta.abs_diff(target) <= 10;
            parts.push(format!("{scheme} {objective}={beta}"));
        }
    }
    report(8, pass, &parts.join(", "));
}

#[test]
fn criterion_09_fig8_relays() {
    let out = run_figure(Figure::Fig8, None).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for (scheme, target) in [(Scheme::TasMrc, 770.0), (Scheme::TasSc, 1030.0)] {
        let k_lat = summary_u32(&out, &format!("{scheme} K_min_latency"));
        let k_thr = summary_u32(&out, &format!("{scheme} K_max_throughput"));
        let cu = summary_f64(&out, &format!("{scheme} min_latency_cu"));
        let ms = summary_f64(&out, &format!("{scheme} min_latency_ms"));
        pass &= k_lat == 1 && k_thr == 1 && ((cu - target) / target).abs() <= 0.10;
        parts.push(format!("{scheme} K*={k_lat}/{k_thr} {cu} CUs {ms} ms"));
    }
    report(9, pass, &parts.join(", "));
}

#[test]
fn criterion_10_latency_limits() {
    let retx = RetxConfig::default();
    let mut pass = true;
    for (t_s, t_f) in [(1536.0, 195.04), (768.0, 0.0), (3.0, 1e4)] {
        let lat = e2e_latency(0.0, t_s, t_f, &retx).unwrap();
        let thr = e2e_throughput(0.0, lat, t_f, &retx, 1024).unwrap();
        pass &= lat == t_s && thr == 1024.0 / t_s;
        let single = RetxConfig { max_retx: 0, ..retx };
        for i in 0..1000 {
            let eps = f64::from(i) / 1000.0;
            pass &= e2e_latency(eps, t_s, t_f, &single).unwrap() == t_s;
        }
    }
    report(10, pass, "eps = 0 and L = 0 limits hold exactly");
}

fn mc_validate(threads: &str) -> (Vec<u8>, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_fblrelay"))
        .args(["--threads", threads, "mc-validate", "--seed", "42", "--trials", "1000000"])
        .output()
        .expect("run fblrelay");
    (out.stdout, out.stderr)
}

#[test]
fn criterion_11_deterministic_output() {
    let (a, a_err) = mc_validate("1");
    let (b, b_err) = mc_validate("4");
    let rows = a.iter().filter(|&&c| c == b'\n').count();
    report(
        11,
        !a.is_empty() && a == b && a_err == b_err,
        &format!("{} bytes, {rows} lines, identical across 1 and 4 threads: {}", a.len(), a == b),
    );
}
