use proptest::prelude::*;
use rics_core::config::validate_config;
use rics_core::scenario::{build_scenario, distance, pair_v2v, Point};
use rics_core::{Error, ScenarioConfig};

fn on_line(xs: &[f64]) -> Vec<Point> {
    xs.iter().map(|&x| [x, 0.0, 0.0]).collect()
}

#[test]
fn reference_parameters_validate() {
    let cfg = ScenarioConfig::reference();
    assert_eq!((cfg.num_cvs, cfg.num_v2v_pairs, cfg.num_elements), (10, 10, 30));
    assert_eq!(cfg.cv_power, 28.0);
    assert!(validate_config(&cfg).is_ok());
}

#[test]
fn boundary_configs_rejected() {
    let no_cvs = ScenarioConfig { num_cvs: 0, ..ScenarioConfig::reference() };
    assert!(validate_config(&no_cvs).unwrap_err().contains(&"num_cvs ≥ 1".to_string()));
    let no_outage = ScenarioConfig { outage_cap: 0.0, ..ScenarioConfig::reference() };
    assert!(validate_config(&no_outage)
        .unwrap_err()
        .contains(&"outage_cap in (0,0.5)".to_string()));
    assert!(matches!(build_scenario(&no_cvs, 0), Err(Error::InvalidConfig(_))));
}

#[test]
fn default_density_leaves_slack() {
    let cfg = ScenarioConfig::reference();
    let expected = cfg.vehicle_density * std::f64::consts::TAU * cfg.road_radius;
    assert!(expected >= 3.0 * (cfg.num_cvs + 2 * cfg.num_v2v_pairs) as f64);
}

#[test]
fn same_seed_same_scenario() {
    let cfg = ScenarioConfig::reference();
    let a = build_scenario(&cfg, 42).unwrap();
    let b = build_scenario(&cfg, 42).unwrap();
    assert_eq!(a, b);
    let c = build_scenario(&cfg, 43).unwrap();
    assert_ne!(a.cv_positions, c.cv_positions);
}

#[test]
fn vehicles_stay_inside_the_field() {
    let cfg = ScenarioConfig::reference();
    assert_eq!(cfg.field_radius, 500.0);
    assert_eq!(cfg.bs_position, [0.0, 0.0, 30.0]);
    assert_eq!(cfg.rics_position, [80.0, 0.0, 30.0]);
    let origin = [0.0, 0.0, 0.0];
    for seed in 0..20 {
        let sc = build_scenario(&cfg, seed).unwrap();
        for p in sc.cv_positions.iter().chain(&sc.v2v_tx_positions).chain(&sc.v2v_rx_positions) {
            assert!(distance(p, &origin) <= 500.0);
        }
    }
}

#[test]
fn pairing_examples() {
    assert_eq!(pair_v2v(&on_line(&[0.0, 5.0]), 1).unwrap(), vec![(0, 1)]);
    assert_eq!(
        pair_v2v(&on_line(&[0.0, 1.0, 3.0, 7.0]), 2).unwrap(),
        vec![(0, 1), (2, 3)]
    );
    assert!(matches!(
        pair_v2v(&on_line(&[0.0, 1.0, 2.0]), 2),
        Err(Error::InsufficientVehicles { needed: 4, available: 3 })
    ));
}

/// Greedy pass by index, written out independently.
fn greedy_oracle(points: &[Point], pairs: usize) -> Vec<(usize, usize)> {
    let mut free: Vec<bool> = vec![true; points.len()];
    let mut out = Vec::new();
    for i in 0..points.len() {
        if out.len() == pairs {
            break;
        }
        if !free[i] {
            continue;
        }
        let j = (0..points.len())
            .filter(|&j| j != i && free[j])
            .min_by(|&a, &b| {
                distance(&points[i], &points[a])
                    .total_cmp(&distance(&points[i], &points[b]))
                    .then(a.cmp(&b))
            })
            .unwrap();
        free[i] = false;
        free[j] = false;
        out.push((i, j));
    }
    out
}

fn points(max: usize) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec((-100.0..100.0f64, -100.0..100.0f64), 2..max)
        .prop_map(|v| v.into_iter().map(|(x, y)| [x, y, 0.0]).collect())
}

proptest! {
    #[test]
    fn pairs_are_disjoint_and_greedy(pts in points(30), frac in 0.0..1.0f64) {
        let pairs = ((pts.len() / 2) as f64 * frac).floor() as usize;
        let got = pair_v2v(&pts, pairs).unwrap();
        prop_assert_eq!(got.len(), pairs);
        let mut seen = std::collections::HashSet::new();
        for &(a, b) in &got {
            prop_assert!(seen.insert(a) && seen.insert(b));
        }
        prop_assert_eq!(got, greedy_oracle(&pts, pairs));
    }

    #[test]
    fn scenario_invariants(seed in any::<u64>(), m in 1usize..8, n in 1usize..8) {
        let cfg = ScenarioConfig { num_cvs: m, num_v2v_pairs: n, ..ScenarioConfig::reference() };
        let sc = build_scenario(&cfg, seed).unwrap();
        prop_assert_eq!(sc.num_cvs(), m);
        prop_assert_eq!(sc.num_pairs(), n);
        prop_assert!(sc.num_vehicles >= m + 2 * n);
        let [lo, hi] = cfg.local_cpu_range;
        prop_assert!(sc.local_cpu.iter().all(|f| (lo..=hi).contains(f)));
        let origin = [0.0, 0.0, 0.0];
        prop_assert!(sc.cv_positions.iter().all(|p| distance(p, &origin) <= cfg.field_radius));
        prop_assert_eq!(build_scenario(&cfg, seed).unwrap(), sc);
    }
}
