use proptest::prelude::*;
use rand::Rng;
use rics_core::channel::{
    assemble_channels, cascaded_gain, complex_normal, path_loss, sample_rician, ula_steering, C64,
};
use rics_core::rng::{stream_rng, Stream};
use rics_core::scenario::build_scenario;
use rics_core::units::db_to_linear;
use rics_core::ScenarioConfig;

const DRAWS: usize = 1_000_000;

#[test]
fn path_loss_examples() {
    let c0 = db_to_linear(-30.0);
    assert!((path_loss(1.0, c0, 2.5).unwrap() - 0.031_622_8).abs() < 1e-7);
    // sqrt(1e-3 · 100^-2.5)
    assert!((path_loss(100.0, 1e-3, 2.5).unwrap() - (1e-3f64 * 1e-5).sqrt()).abs() < 1e-18);
    assert!(path_loss(0.0, c0, 2.5).is_err());
}

#[test]
fn half_wavelength_broadside() {
    let v = ula_steering(2, std::f64::consts::FRAC_PI_2, 0.5);
    assert!((v[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
    assert!((v[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    assert!(ula_steering(7, 0.0, 0.5).iter().all(|z| *z == C64::new(1.0, 0.0)));
}

/// Per-entry second moment of `sample_rician` over fresh draws.
fn empirical_power(los: &[C64], kappa: f64, pl: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, Stream::Oracle);
    let mut acc = vec![0.0; los.len()];
    for _ in 0..DRAWS / los.len() {
        for (a, h) in acc.iter_mut().zip(sample_rician(los, kappa, pl, &mut rng)) {
            *a += h.norm_sqr();
        }
    }
    acc.iter().map(|a| a / (DRAWS / los.len()) as f64).collect()
}

#[test]
fn rayleigh_variance_matches_path_gain() {
    let los = vec![C64::new(1.0, 0.0); 4];
    let pl = 0.3;
    let mean: f64 = empirical_power(&los, 0.0, pl, 1).iter().sum::<f64>() / 4.0;
    assert!((mean / (pl * pl) - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn rician_second_moment() {
    let los = ula_steering(4, 0.4, 0.5);
    let pl = 0.05;
    for (i, p) in empirical_power(&los, 4.0, pl, 2).iter().enumerate() {
        let closed = pl * pl * (0.8 * los[i].norm_sqr() + 0.2);
        assert!((p / closed - 1.0).abs() < 0.02, "entry {i}: {p} vs {closed}");
    }
}

#[test]
fn direct_links_are_unit_power_after_path_loss() {
    let cfg = ScenarioConfig { num_elements: 1, ..ScenarioConfig::reference() };
    let mut sum = 0.0;
    let mut count = 0usize;
    for seed in 0..5_000u64 {
        let sc = build_scenario(&cfg, seed).unwrap();
        let ch = assemble_channels(&sc, &cfg, seed).unwrap();
        for (row, gains) in ch.h_mn.iter().zip(&ch.stats.gain_mn) {
            for (h, g) in row.iter().zip(gains) {
                sum += h.norm_sqr() / g;
                count += 1;
            }
        }
    }
    let mean = sum / count as f64;
    assert!((mean - 1.0).abs() < 0.02, "{mean}");
}

#[test]
fn assembled_vectors_have_reference_length() {
    let cfg = ScenarioConfig::reference();
    let sc = build_scenario(&cfg, 9).unwrap();
    let ch = assemble_channels(&sc, &cfg, 9).unwrap();
    assert_eq!(ch.num_elements(), 30);
    assert!(ch.h_mr.iter().chain(&ch.h_rn).all(|v| v.len() == 30));
    assert_eq!(ch, assemble_channels(&sc, &cfg, 9).unwrap());
}

#[test]
fn cascade_matches_direct_summation() {
    let mut rng = stream_rng(4, Stream::Oracle);
    let mut draw = |k| -> Vec<C64> { (0..k).map(|_| complex_normal(&mut rng)).collect() };
    let (out, diag, inp) = (draw(4), draw(4), draw(4));
    let direct = draw(1)[0];
    let mut oracle = direct;
    for l in 0..4 {
        oracle += out[l] * diag[l] * inp[l];
    }
    let got = cascaded_gain(&out, &diag, &inp, direct).unwrap();
    assert!((got - oracle).norm() < 1e-12);
}

fn cvec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64).prop_map(|(a, b)| C64::new(a, b)), len)
}

proptest! {
    #[test]
    fn path_loss_decreases(d in 1.0..1e4f64, step in 1e-3..100.0f64) {
        let c0 = 1e-3;
        prop_assert!(path_loss(d + step, c0, 2.5).unwrap() < path_loss(d, c0, 2.5).unwrap());
    }

    #[test]
    fn steering_is_unit_modulus(len in 1usize..64, angle in -7.0..7.0f64) {
        prop_assert!(ula_steering(len, angle, 0.5).iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn cascade_is_linear_in_diagonal(
        out in cvec(5), inp in cvec(5), a in cvec(5), b in cvec(5), s in -3.0..3.0f64
    ) {
        let zero = C64::new(0.0, 0.0);
        let mix: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let lhs = cascaded_gain(&out, &mix, &inp, zero).unwrap();
        let rhs = cascaded_gain(&out, &a, &inp, zero).unwrap() + s * cascaded_gain(&out, &b, &inp, zero).unwrap();
        prop_assert!((lhs - rhs).norm() < 1e-10);
    }

    #[test]
    fn channels_are_seed_deterministic(seed in any::<u64>()) {
        let cfg = ScenarioConfig { num_cvs: 3, num_v2v_pairs: 2, num_elements: 4, ..ScenarioConfig::reference() };
        let sc = build_scenario(&cfg, seed).unwrap();
        let a = assemble_channels(&sc, &cfg, seed).unwrap();
        let b = assemble_channels(&sc, &cfg, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn zero_diagonal_returns_direct_term() {
    let mut rng = stream_rng(5, Stream::Oracle);
    let h: Vec<C64> = (0..6).map(|_| complex_normal(&mut rng)).collect();
    let d = C64::new(rng.random(), rng.random());
    assert_eq!(cascaded_gain(&h, &[C64::new(0.0, 0.0); 6], &h, d).unwrap(), d);
}
