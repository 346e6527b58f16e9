use proptest::prelude::*;
use rics_core::aioa::{check_convergence, complexity_estimate, run_aioa, AioaOptions, Policy};
use rics_core::harness::{realize, run_scheme, Scheme};
use rics_core::metrics::SurfaceMode;
use rics_core::model::System;
use rics_core::rng::{stream_rng, Stream};
use rics_core::ScenarioConfig;

fn full_run(cfg: &ScenarioConfig, seed: u64) -> rics_core::aioa::SolverTrace {
    let (sc, ch) = realize(cfg, seed).unwrap();
    let sys = System::new(cfg, &sc, &ch, SurfaceMode::Rics).unwrap();
    let opts = AioaOptions::from_config(cfg);
    let mut init = stream_rng(seed, Stream::Init);
    let mut scheme = stream_rng(seed, Stream::Scheme);
    run_aioa(&sys, &Policy::full(), &opts, &mut init, &mut scheme).unwrap()
}

#[test]
fn convergence_rule_examples() {
    assert!(!check_convergence(&[1.0], 1e-3));
    assert!(!check_convergence(&[1.0, 1.1], 1e-3));
    assert!(check_convergence(&[1.0, 1.1, 1.1005], 1e-3));
    // Improvement exactly at the tolerance is not yet converged.
    assert!(!check_convergence(&[1.0, 2.0], 0.5));
    assert!(check_convergence(&[3.0, 3.0], 0.0));
}

#[test]
fn complexity_examples() {
    let unit = complexity_estimate(1, 1, 1, 1, 1);
    assert!((unit - (2.0 + 2f64.powf(3.5) + 1.0)).abs() < 1e-12);
    assert!((unit - 14.3137).abs() < 1e-4);
    let base = complexity_estimate(3, 4, 5, 6, 7);
    assert!(complexity_estimate(4, 4, 5, 6, 7) > base);
    assert!(complexity_estimate(3, 5, 5, 6, 7) > base);
    assert!(complexity_estimate(3, 4, 6, 6, 7) > base);
    assert!(complexity_estimate(3, 4, 5, 7, 7) > base);
    assert!(complexity_estimate(3, 4, 5, 6, 8) > base);
}

#[test]
fn default_run_is_monotone_and_converges() {
    let cfg = ScenarioConfig::reference();
    for seed in 0..3 {
        let t = full_run(&cfg, seed);
        let obj = t.objective_trace();
        assert!(obj.windows(2).all(|w| w[1] >= w[0] - 1e-6 * w[0].abs()), "seed {seed}: {obj:?}");
        assert!(t.converged && t.outer_iters <= 15, "seed {seed}: {} cycles", t.outer_iters);
        assert_eq!(t.outer_iters, obj.len());
        // The closing offload pass can only add to the last recorded value.
        assert!(t.objective.value >= obj.last().unwrap() * (1.0 - 1e-9));
    }
}

#[test]
fn solution_respects_every_constraint() {
    let cfg = ScenarioConfig::reference();
    for seed in 0..3 {
        let (sc, ch) = realize(&cfg, seed).unwrap();
        let sys = System::new(&cfg, &sc, &ch, SurfaceMode::Rics).unwrap();
        let t = full_run(&cfg, seed);
        assert!(t.profile.audit(cfg.psi_bounds, 1e-9).is_empty());
        assert!(t.profile.energy_residual() <= 1e-12);
        assert!(t.rho.rho.iter().all(|r| (0.0..=1.0).contains(r)));
        assert!(t.alpha.binary);
        assert!(t.alpha.audit(0.0).is_empty());
        assert!(t.alpha.alpha.iter().all(|row| row.iter().all(|a| *a == 0.0 || *a == 1.0)));
        assert!(sys.outage_violations(&t.profile, &t.alpha, 1e-9).is_empty());
        assert_eq!(t.report.per_cv.len(), cfg.num_cvs);
    }
}

#[test]
fn runs_are_reproducible() {
    let cfg = ScenarioConfig { num_elements: 12, ..ScenarioConfig::reference() };
    for scheme in [Scheme::Aioa, Scheme::RandPsi, Scheme::RandSpectrum] {
        let a = run_scheme(scheme, &cfg, 11).unwrap();
        let b = run_scheme(scheme, &cfg, 11).unwrap();
        assert_eq!(a.trace.objective_trace(), b.trace.objective_trace());
        assert_eq!(a.trace.profile, b.trace.profile);
        assert_eq!(a.trace.alpha, b.trace.alpha);
        assert_eq!(a.trace.rho, b.trace.rho);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn small_runs_keep_the_invariants(seed in 0u64..10_000, m in 1usize..5, n in 1usize..5, l in 2usize..10) {
        let cfg = ScenarioConfig { num_cvs: m, num_v2v_pairs: n, num_elements: l, ..ScenarioConfig::reference() };
        let (sc, ch) = realize(&cfg, seed).unwrap();
        let sys = System::new(&cfg, &sc, &ch, SurfaceMode::Rics).unwrap();
        let t = full_run(&cfg, seed);
        let obj = t.objective_trace();
        prop_assert!(obj.windows(2).all(|w| w[1] >= w[0] - 1e-6 * w[0].abs()));
        prop_assert!(t.outer_iters <= AioaOptions::from_config(&cfg).max_outer);
        prop_assert!(t.profile.audit(cfg.psi_bounds, 1e-9).is_empty());
        prop_assert!(t.alpha.audit(0.0).is_empty());
        prop_assert!(sys.outage_violations(&t.profile, &t.alpha, 1e-9).is_empty());
    }
}
