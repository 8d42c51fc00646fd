use fblrelay_core::analytic::{compare_reliability, e2e_bler_quadrature, e2e_log_success};
use fblrelay_core::latency::{evaluate, optimize_blocklength};
use fblrelay_core::montecarlo::estimate_e2e_bler;
use fblrelay_core::{
    asymptotic_report, bler_report, build_hop_budgets, coding_rate, Estimator, Integrand, McConfig, Objective,
    RetxConfig, Scheme, SystemConfig,
};

fn cfg(scheme: Scheme, snr_db: f64) -> SystemConfig {
    SystemConfig { scheme, avg_snr_db: snr_db, ..SystemConfig::default() }
}

#[test]
fn closed_form_matches_quadrature_across_snr() {
    for scheme in Scheme::ALL {
        for snr in [-5.0, 0.0, 5.0, 10.0, 20.0] {
            let c = cfg(scheme, snr);
            let closed = bler_report(&c).unwrap().e2e;
            let quad = e2e_bler_quadrature(&c, Integrand::Psi).unwrap();
            let rel = (closed - quad).abs() / quad.max(1e-300);
            assert!(rel < 1e-6, "{scheme:?} {snr} dB: {closed} vs {quad}");
        }
    }
}

#[test]
fn asymptote_approaches_closed_form_at_high_snr() {
    for scheme in Scheme::ALL {
        let c = cfg(scheme, 40.0);
        let exact = bler_report(&c).unwrap().e2e;
        let asym = asymptotic_report(&c).unwrap().e2e_asym;
        assert!((asym / exact - 1.0).abs() < 0.1, "{scheme:?}: {asym} vs {exact}");
    }
}

#[test]
fn monte_carlo_brackets_analytic_value() {
    let c = cfg(Scheme::TasMrc, 8.0);
    let budgets = build_hop_budgets(&c).unwrap();
    let mc = McConfig { trials: 200_000, seed: 3, estimator: Estimator::SemiAnalytic, chunk_size: 10_000 };
    let est = estimate_e2e_bler(&c, &budgets, &mc).unwrap();
    let exact = e2e_bler_quadrature(&c, Integrand::ExactQ).unwrap();
    assert!(est.ci_low <= exact && exact <= est.ci_high, "{exact} not in [{}, {}]", est.ci_low, est.ci_high);
    assert!((est.mean + est.success_mean - 1.0).abs() < 1e-12);
}

#[test]
fn mrc_is_never_worse_than_sc() {
    for snr in [-10.0, 0.0, 10.0, 25.0] {
        let mrc = cfg(Scheme::TasMrc, snr);
        let sc = cfg(Scheme::TasSc, snr);
        assert_ne!(compare_reliability(&mrc, &sc).unwrap(), std::cmp::Ordering::Greater, "{snr} dB");
        assert!(e2e_log_success(&mrc, Integrand::Psi).unwrap() >= e2e_log_success(&sc, Integrand::Psi).unwrap());
    }
}

#[test]
fn latency_pipeline_is_consistent() {
    let c = SystemConfig { blocklength: 200, ..cfg(Scheme::TasMrc, 10.0) };
    let retx = RetxConfig::default();
    let rep = evaluate(&c, &retx).unwrap();
    assert!(rep.latency_cu >= rep.t_s);
    assert!((rep.latency_ms - rep.latency_cu * retx.cu_duration_us / 1000.0).abs() < 1e-9);
    assert!(rep.throughput <= f64::from(c.info_bits) / rep.t_s + 1e-12);
    assert!((coding_rate(&c) - 1024.0 / 200.0).abs() < 1e-12);

    let betas: Vec<u32> = (150..=400).step_by(10).collect();
    let opt = optimize_blocklength(&c, &retx, &betas, Objective::MinLatency).unwrap();
    assert_eq!(opt.sweep.len(), betas.len());
    assert!(opt.sweep.iter().all(|(_, r)| r.latency_cu >= opt.report.latency_cu));
}
