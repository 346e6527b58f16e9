use std::f64::consts::{E, PI};

use proptest::prelude::*;
use rics_core::metasurface::{
    design_psi_range, eps_ratio, feasible_psi_range, grin_permittivity, ms_material, transfer_gain, GrinDesign,
    VACUUM_PERMITTIVITY,
};
use rics_core::Error;

#[test]
fn lens_profile() {
    let (lg, wide) = (35e-6, 100e-6);
    let eps_c = 2.01 * VACUUM_PERMITTIVITY;
    assert_eq!(grin_permittivity(0.0, eps_c, lg, wide).unwrap(), eps_c);
    assert!(grin_permittivity(2.0 * lg / PI, eps_c, lg, wide).unwrap().abs() < 1e-12 * eps_c);
    let mid = grin_permittivity(17.5e-6, eps_c, lg, wide).unwrap();
    let hand = eps_c * (1.0 - (PI / 4.0) * (PI / 4.0));
    assert!((mid - hand).abs() < 1e-12 * eps_c);
    assert!(matches!(
        grin_permittivity(60e-6, eps_c, lg, wide),
        Err(Error::OutOfAperture { .. })
    ));
}

#[test]
fn transfer_gain_examples() {
    assert_eq!(transfer_gain(1.0, 2.0).unwrap(), 1.0);
    assert_eq!(transfer_gain(2.0, 2.0).unwrap(), 0.5);
    assert!(transfer_gain(0.0, 2.0).is_err());
}

#[test]
fn permittivity_ratio_examples() {
    let d = GrinDesign::default();
    let (k0, w) = (d.k0(), d.width_normalized());
    // Ψ·W exactly 2 in floating point.
    let unity = eps_ratio(0.5, d.delta, k0, 4.0).unwrap();
    assert_eq!(unity.re, 0.0);
    assert_eq!(unity.im, 0.0);
    assert_eq!(transfer_gain(0.5, 4.0).unwrap(), 1.0);
    assert!(eps_ratio(2.0 / w, d.delta, k0, w).unwrap().norm() < 1e-15);

    let e = eps_ratio(2.0 * E / w, d.delta, k0, w).unwrap();
    assert!((e.im - 1.0 / (k0 * d.delta)).abs() < 1e-12);

    let spec = ms_material(2.0 / w, &d).unwrap();
    assert!(spec.feasible);
    assert_eq!(spec.mu_ratio(), spec.eps_ratio);
}

#[test]
fn loss_cap_bounds_feasibility() {
    let d = GrinDesign { loss_cap: 1.0, ..GrinDesign::default() };
    let w = d.width_normalized();
    let beyond = 2.0 / w * (1.5 * d.k0() * d.delta).exp();
    let spec = ms_material(beyond, &d).unwrap();
    assert!(spec.eps_ratio.im.abs() > 1.0);
    assert!(!spec.feasible);
    assert!(GrinDesign::default().loss_cap == 100.0);
}

#[test]
fn zero_cap_is_a_singleton() {
    let [lo, hi] = feasible_psi_range(1e-6, 2e6, 20.0, 0.0);
    assert_eq!(lo, 0.1);
    assert_eq!(hi, 0.1);
}

#[test]
fn default_range_is_wide() {
    let [lo, hi] = design_psi_range(&GrinDesign::default());
    assert!(lo < 1e-50 && hi > 1e50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn range_and_flag_agree(offset in -3.0..3.0f64, cap in 0.1..100.0f64) {
        let d = GrinDesign { loss_cap: cap, ..GrinDesign::default() };
        let [lo, hi] = design_psi_range(&d);
        let center = 2.0 / d.width_normalized();
        // Log-offset in units of the half-width of the interval.
        let psi = center * (offset * cap * d.k0() * d.delta).exp();
        let spec = ms_material(psi, &d).unwrap();
        let margin = 1e-9;
        if offset.abs() < 1.0 - margin {
            prop_assert!(spec.feasible && psi >= lo && psi <= hi);
        } else if offset.abs() > 1.0 + margin {
            prop_assert!(!spec.feasible && (psi < lo || psi > hi));
        }
    }

    #[test]
    fn ratio_is_imaginary(psi in 1e-3..1e3f64) {
        let d = GrinDesign::default();
        prop_assert_eq!(ms_material(psi, &d).unwrap().eps_ratio.re, 0.0);
    }
}
