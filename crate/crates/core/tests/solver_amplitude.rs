use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rics_core::channel::C64;
use rics_core::harness::realize;
use rics_core::metrics::{v2v_interference_gain, RicsProfile, SurfaceMode};
use rics_core::model::System;
use rics_core::rng::{stream_rng, Stream};
use rics_core::solver_amplitude::{solve_amplitude_gd, GdOptions, LsProblem, LsTerm};
use rics_core::validation::{central_difference, relative_error, round_robin};
use rics_core::ScenarioConfig;

fn problem(l: usize, seed: u64) -> (LsProblem, ScenarioConfig) {
    let cfg = ScenarioConfig { num_elements: l, ..ScenarioConfig::reference() };
    let (sc, ch) = realize(&cfg, seed).unwrap();
    let sys = System::new(&cfg, &sc, &ch, SurfaceMode::Rics).unwrap();
    let mut rng = stream_rng(seed, Stream::Init);
    let profile = RicsProfile::random_even(l, &mut rng);
    (LsProblem::new(&sys, &round_robin(10, 10), &profile), cfg)
}

/// Normal equations `A ψ = b` of the real least-squares objective.
fn normal_equations(prob: &LsProblem, l: usize) -> (DMatrix<f64>, DVector<f64>, f64) {
    let mut a = DMatrix::zeros(l, l);
    let mut b = DVector::zeros(l);
    let mut c = 0.0;
    for t in &prob.terms {
        for i in 0..l {
            for j in 0..l {
                a[(i, j)] += t.weight * (t.coeffs[i].conj() * t.coeffs[j]).re;
            }
            b[i] -= t.weight * (t.coeffs[i].conj() * t.direct).re;
        }
        c += t.weight * t.direct.norm_sqr();
    }
    (a, b, c)
}

/// Box-constrained minimizer by enumerating every active set.
fn projected_oracle(prob: &LsProblem, l: usize, [lo, hi]: [f64; 2]) -> f64 {
    let (a, b, _) = normal_equations(prob, l);
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(l as u32) {
        let mut state = vec![0u8; l];
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut x = DVector::zeros(l);
        let free: Vec<usize> = (0..l).filter(|&i| state[i] == 2).collect();
        for i in 0..l {
            x[i] = match state[i] {
                0 => lo,
                1 => hi,
                _ => 0.0,
            };
        }
        if !free.is_empty() {
            let k = free.len();
            let mut af = DMatrix::zeros(k, k);
            let mut bf = DVector::zeros(k);
            for (p, &i) in free.iter().enumerate() {
                bf[p] = b[i];
                for j in 0..l {
                    if state[j] != 2 {
                        bf[p] -= a[(i, j)] * x[j];
                    }
                }
                for (q, &j) in free.iter().enumerate() {
                    af[(p, q)] = a[(i, j)];
                }
            }
            let Some(sol) = af.lu().solve(&bf) else { continue };
            for (p, &i) in free.iter().enumerate() {
                x[i] = sol[p];
            }
        }
        if x.iter().all(|v| *v >= lo - 1e-12 && *v <= hi + 1e-12) {
            best = best.min(prob.ls_objective(x.as_slice()));
        }
    }
    best
}

#[test]
fn perfect_cancellation_is_zero() {
    let prob = LsProblem {
        terms: vec![LsTerm {
            weight: 3.0,
            direct: C64::new(-0.5, 0.25),
            coeffs: vec![C64::new(0.5, -0.25)],
        }],
    };
    assert_eq!(prob.ls_objective(&[1.0]), 0.0);
    assert_eq!(prob.ls_gradient(&[1.0]), vec![0.0]);
}

#[test]
fn unit_factors_match_the_interference_gain() {
    let cfg = ScenarioConfig { num_elements: 6, ..ScenarioConfig::reference() };
    let (sc, ch) = realize(&cfg, 3).unwrap();
    let sys = System::new(&cfg, &sc, &ch, SurfaceMode::Rics).unwrap();
    let mut rng = stream_rng(3, Stream::Init);
    let profile = RicsProfile::random_even(6, &mut rng);
    let alpha = round_robin(10, 10);
    let prob = LsProblem::new(&sys, &alpha, &profile);
    let refr = profile.refraction(SurfaceMode::Rics);
    let b = cfg.budget();
    let mut oracle = 0.0;
    for m in 0..10 {
        for n in 0..10 {
            oracle += alpha.alpha[m][n] * b.cv_power / b.noise * v2v_interference_gain(m, n, &ch, &refr);
        }
    }
    let ours = prob.ls_objective(&[1.0; 6]);
    assert!((ours - oracle).abs() <= 1e-12 * oracle);
    assert!((prob.ls_objective_split(&[1.0; 6]) - ours).abs() <= 1e-12 * ours);
}

#[test]
fn objective_is_exactly_quadratic() {
    let (prob, _) = problem(5, 4);
    let (a, b, c) = normal_equations(&prob, 5);
    let psi = [0.7, 1.3, 0.9, 1.9, 0.6];
    let x = DVector::from_row_slice(&psi);
    let quad = (x.transpose() * &a * &x)[(0, 0)] - 2.0 * b.dot(&x) + c;
    let f = prob.ls_objective(&psi);
    assert!((quad - f).abs() <= 1e-10 * f);
}

#[test]
fn gradient_vanishes_at_the_unconstrained_optimum() {
    let (prob, _) = problem(6, 5);
    let (a, b, _) = normal_equations(&prob, 6);
    let x = a.clone().lu().solve(&b).unwrap();
    let g = prob.ls_gradient(x.as_slice());
    let scale = prob.ls_gradient(&[1.0; 6]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(norm <= 1e-8 * scale, "{norm} vs {scale}");
}

#[test]
fn gradient_matches_differences() {
    let (prob, _) = problem(8, 6);
    let psi = [0.8, 1.1, 1.7, 0.55, 1.2, 1.95, 1.0, 0.7];
    let fd = central_difference(|p| prob.ls_objective(p), &psi, 1e-6);
    assert!(relative_error(&prob.ls_gradient(&psi), &fd) <= 1e-5);
}

#[test]
fn descent_reaches_the_box_constrained_optimum() {
    for seed in [7u64, 8] {
        let (prob, cfg) = problem(8, seed);
        let sol = solve_amplitude_gd(&prob, 8, cfg.psi_bounds, GdOptions::default());
        let f = *sol.trace.last().unwrap();
        assert!(f <= prob.ls_objective(&[1.0; 8]));
        assert!(sol.trace.windows(2).all(|w| w[1] < w[0]));
        assert!(f > 0.0);
        let oracle = projected_oracle(&prob, 8, cfg.psi_bounds);
        assert!((f - oracle).abs() <= 1e-6 * oracle, "seed {seed}: {f} vs {oracle}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn solution_never_worse_than_unit_factors(seed in 0u64..1000) {
        let (prob, cfg) = problem(6, seed);
        let sol = solve_amplitude_gd(&prob, 6, cfg.psi_bounds, GdOptions::default());
        prop_assert!(prob.ls_objective(&sol.psi) <= prob.ls_objective(&[1.0; 6]));
        prop_assert!(sol.psi.iter().all(|p| (cfg.psi_bounds[0]..=cfg.psi_bounds[1]).contains(p)));
        prop_assert!(sol.trace.windows(2).all(|w| w[1] <= w[0]));
    }
}
