//! Self-checks of the closed forms and block solvers against brute force.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_normal, rician_weights, ChannelSet, C64};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::harness::realize;
use crate::metrics::{
    expected_interference, safety_coefficient, CvTask, OffloadPlan, RicsProfile, SpectrumAssignment, SurfaceMode,
};
use crate::model::System;
use crate::rng::{stream_rng, Stream};
use crate::solver_amplitude::LsProblem;
use crate::solver_offload::{solve_offload, FpOptions};
use crate::solver_phase::{coupled_element_update, PhaseProblem};
use crate::solver_spectrum::{rate_dc_parts, repair, solve_spectrum_sca, taylor_linearize_q, SpectrumOptions, SpectrumProblem, UplinkTerms};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    McExpectation,
    GradCheck,
    PhaseGrid,
    OffloadGrid,
    SpectrumExhaustive,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::McExpectation,
        Suite::GradCheck,
        Suite::PhaseGrid,
        Suite::OffloadGrid,
        Suite::SpectrumExhaustive,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Suite::McExpectation => "mc-expectation",
            Suite::GradCheck => "gradcheck",
            Suite::PhaseGrid => "phase-grid",
            Suite::OffloadGrid => "offload-grid",
            Suite::SpectrumExhaustive => "spectrum-exhaustive",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.id() == s)
            .ok_or_else(|| Error::UnknownSuite(s.to_string()))
    }
}

/// A measured discrepancy against its allowed bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            passed: measured <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{} {}: {:.3e} (tol {:.1e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance
            )?;
        }
        write!(f, "{}: {}", self.suite, if self.passed() { "passed" } else { "failed" })
    }
}

pub const MC_DRAWS: usize = 1_000_000;
pub const MC_TOL: f64 = 0.02;
pub const GRAD_TOL: f64 = 1e-5;
pub const GRID_TOL: f64 = 1e-3;
pub const OFFLOAD_TOL: f64 = 1e-6;
pub const SPECTRUM_TOL: f64 = 0.05;

pub fn validate(suite: Suite, cfg: &ScenarioConfig) -> Result<ValidationReport> {
    let checks = match suite {
        Suite::McExpectation => mc_suite(cfg)?,
        Suite::GradCheck => grad_suite(cfg)?,
        Suite::PhaseGrid => vec![phase_grid_check(100, 7)],
        Suite::OffloadGrid => vec![offload_grid_check(cfg, 40, 11)?],
        Suite::SpectrumExhaustive => spectrum_checks(cfg)?,
    };
    Ok(ValidationReport {
        suite: suite.id().to_string(),
        checks,
    })
}

/// Sample mean of `|h_d + Σ conj(h_rn)·φ·h_mr|²` over fresh fading draws.
#[allow(clippy::too_many_arguments)]
pub fn mc_interference(
    gain_direct: f64,
    gain_cascade: f64,
    kappa: f64,
    los_rn: &[C64],
    phi: &[C64],
    los_mr: &[C64],
    draws: usize,
    seed: u64,
) -> f64 {
    const CHUNKS: usize = 64;
    let (w_los, w_nlos) = rician_weights(kappa);
    let amp_d = gain_direct.sqrt();
    // Split the cascade gain evenly between the two hops.
    let amp_hop = gain_cascade.sqrt().sqrt();
    let per_chunk = draws.div_ceil(CHUNKS);
    let total: f64 = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed.wrapping_add(c as u64), Stream::Oracle);
            let mut acc = 0.0;
            for _ in 0..per_chunk {
                let mut z = amp_d * complex_normal(&mut rng);
                for ((a, p), b) in los_rn.iter().zip(phi).zip(los_mr) {
                    let rn = amp_hop * (w_los * a + w_nlos * complex_normal(&mut rng));
                    let mr = amp_hop * (w_los * b + w_nlos * complex_normal(&mut rng));
                    z += rn.conj() * p * mr;
                }
                acc += z.norm_sqr();
            }
            acc
        })
        .sum();
    total / (per_chunk * CHUNKS) as f64
}

fn mc_suite(cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    let (_, ch) = realize(cfg, 1)?;
    let mut rng = stream_rng(1, Stream::Oracle);
    let profile = RicsProfile::random_even(cfg.num_elements, &mut rng);
    let phi = profile.refraction(SurfaceMode::Rics);
    let s = &ch.stats;
    let mut checks = Vec::new();
    // Realized geometry, then unit gains at a few Rician factors.
    let scenario_cases = [(s.gain_mn[0][0], s.gain_rn[0] * s.gain_mr[0], s.kappa, "scenario")];
    for (gd, gc, kappa, label) in scenario_cases
        .into_iter()
        .chain([(1.0, 1.0, 0.0, "kappa=0"), (1.0, 1.0, 1.0, "kappa=1"), (1.0, 1.0, 10.0, "kappa=10")])
    {
        let exact = expected_interference(gd, gc, kappa, kappa, &s.los_rn[0], &phi, &s.los_mr[0]);
        let mc = mc_interference(gd, gc, kappa, &s.los_rn[0], &phi, &s.los_mr[0], MC_DRAWS, 17);
        checks.push(Check::new(format!("interference expectation {label}"), (mc - exact).abs() / exact, MC_TOL));
    }
    Ok(checks)
}

/// `‖a − b‖_∞ / ‖b‖_∞`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Central differences of `f` at `x` with absolute step `h`.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn to_real(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn from_real(x: &[f64]) -> Vec<C64> {
    x.chunks(2).map(|c| C64::new(c[0], c[1])).collect()
}

/// A sharing pattern that loads every pair.
pub fn round_robin(m: usize, n: usize) -> SpectrumAssignment {
    let mut a = SpectrumAssignment::unshared(m, n);
    if n > 0 {
        for (i, row) in a.alpha.iter_mut().enumerate() {
            row[i % n] = 1.0;
        }
    }
    a
}

fn grad_suite(cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    let (sc, ch) = realize(cfg, 2)?;
    let sys = System::new(cfg, &sc, &ch, SurfaceMode::Rics)?;
    let mut rng = stream_rng(2, Stream::Oracle);
    let profile = RicsProfile::random_even(cfg.num_elements, &mut rng);
    let alpha = round_robin(sys.num_cvs(), sys.num_pairs());
    Ok(vec![
        sca_gradient_check(&sys, &profile, &mut rng),
        ls_gradient_check(&sys, &alpha, &profile, &mut rng),
        phase_gradient_check(&sys, &alpha, &profile, &mut rng),
    ])
}

/// Linearized interference-plus-noise term against differences of the exact one.
pub fn sca_gradient_check(sys: &System, profile: &RicsProfile, rng: &mut ChaCha8Rng) -> Check {
    let refl = profile.reflection(sys.mode);
    let mut worst = 0.0f64;
    for m in 0..sys.num_cvs() {
        let terms = UplinkTerms::new(sys, m, &refl);
        let row: Vec<f64> = (0..sys.num_pairs()).map(|_| rng.random_range(0.2..0.8) / sys.num_pairs() as f64).collect();
        let lin = taylor_linearize_q(&terms, &row);
        let fd = central_difference(|r| rate_dc_parts(&terms, r).1, &row, 1e-6 / sys.num_pairs() as f64);
        worst = worst.max(relative_error(&lin.gradient, &fd));
    }
    Check::new("sca linearization gradient", worst, GRAD_TOL)
}

pub fn ls_gradient_check(sys: &System, alpha: &SpectrumAssignment, profile: &RicsProfile, rng: &mut ChaCha8Rng) -> Check {
    let prob = LsProblem::new(sys, alpha, profile);
    let psi: Vec<f64> = (0..profile.len()).map(|_| rng.random_range(0.6..1.9)).collect();
    let g = prob.ls_gradient(&psi);
    let fd = central_difference(|p| prob.ls_objective(p), &psi, 1e-6);
    Check::new("amplitude least-squares gradient", relative_error(&g, &fd), GRAD_TOL)
}

/// Wirtinger-style gradient `∂f/∂Re + j ∂f/∂Im` against differences.
pub fn phase_gradient_check(
    sys: &System,
    alpha: &SpectrumAssignment,
    profile: &RicsProfile,
    rng: &mut ChaCha8Rng,
) -> Check {
    let prob = PhaseProblem::new(sys, alpha, &profile.psi);
    let len = profile.len();
    let perturb = |z: C64, rng: &mut ChaCha8Rng| z * rng.random_range(0.7..1.0);
    let vt: Vec<C64> = (0..len)
        .map(|i| perturb(C64::from_polar(profile.beta_t[i].sqrt(), profile.theta_t[i]), rng))
        .collect();
    let vr: Vec<C64> = (0..len)
        .map(|i| perturb(C64::from_polar(profile.beta_r[i].sqrt(), profile.theta_r[i]), rng))
        .collect();
    let (gt, gr) = prob.gradient(&vt, &vr);
    let fd_t = central_difference(|x| prob.value(&from_real(x), &vr), &to_real(&vt), 1e-6);
    let fd_r = central_difference(|x| prob.value(&vt, &from_real(x)), &to_real(&vr), 1e-6);
    let analytic: Vec<f64> = to_real(&gt).into_iter().chain(to_real(&gr)).collect();
    let fd: Vec<f64> = fd_t.into_iter().chain(fd_r).collect();
    Check::new("phase beamformer gradient", relative_error(&analytic, &fd), GRAD_TOL)
}

/// `Re(conj(v_t) c_t) + Re(conj(v_r) c_r)`.
fn element_value(v_t: C64, v_r: C64, c_t: C64, c_r: C64) -> f64 {
    (v_t.conj() * c_t).re + (v_r.conj() * c_r).re
}

/// Best value over a `(θ_r, β_t, branch)` grid.
pub fn element_grid_max(v_t: C64, v_r: C64, phase_steps: usize, split_steps: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for k in 0..phase_steps {
        let theta_r = 2.0 * PI * k as f64 / phase_steps as f64;
        for offset in [FRAC_PI_2, 3.0 * FRAC_PI_2] {
            let ur = C64::from_polar(1.0, theta_r);
            let ut = C64::from_polar(1.0, theta_r + offset);
            let (at, ar) = ((v_t.conj() * ut).re, (v_r.conj() * ur).re);
            for s in 0..=split_steps {
                let beta_t = s as f64 / split_steps as f64;
                let val = beta_t.sqrt() * at + (1.0 - beta_t).sqrt() * ar;
                best = best.max(val);
            }
        }
    }
    best
}

/// Closed-form per-element update against an exhaustive grid on random targets.
pub fn phase_grid_check(elements: usize, seed: u64) -> Check {
    let mut rng = stream_rng(seed, Stream::Oracle);
    let targets: Vec<(C64, C64)> = (0..elements)
        .map(|_| {
            let scale = rng.random_range(0.1..3.0);
            (scale * complex_normal(&mut rng), scale * complex_normal(&mut rng))
        })
        .collect();
    let worst = targets
        .par_iter()
        .map(|&(vt, vr)| {
            let c = coupled_element_update(vt, vr);
            let coupled = (c.theta_t - c.theta_r).rem_euclid(2.0 * PI);
            let coupling_gap = (coupled - FRAC_PI_2).abs().min((coupled - 3.0 * FRAC_PI_2).abs());
            let split_gap = (c.sqrt_beta_t.powi(2) + c.sqrt_beta_r.powi(2) - 1.0).abs();
            let ours = element_value(vt, vr, c.vt(), c.vr());
            let grid = element_grid_max(vt, vr, 2000, 500);
            // Shortfall against the grid, plus any constraint slip.
            (grid - ours).max(0.0) + coupling_gap + split_gap
        })
        .reduce(|| 0.0, f64::max);
    Check::new("coupled element update vs grid", worst, GRID_TOL)
}

/// Best safety over `ρ ∈ {0, step, …, 1}` for one CV.
pub fn offload_grid_max(task: &CvTask, rate: f64, steps: usize) -> f64 {
    (0..=steps)
        .map(|k| safety_coefficient(0, k as f64 / steps as f64, rate, task).unwrap_or(f64::NEG_INFINITY))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Fractional-programming offload against a `1e-5` grid, relative shortfall.
pub fn offload_grid_check(cfg: &ScenarioConfig, cases: usize, seed: u64) -> Result<Check> {
    let mut rng = stream_rng(seed, Stream::Oracle);
    let [lo, hi] = cfg.local_cpu_range;
    let tasks: Vec<CvTask> = (0..cases)
        .map(|_| {
            let bits = cfg.task_bits * rng.random_range(0.2..2.0);
            CvTask {
                bits,
                cycles: bits * cfg.cycles_per_bit,
                local_cpu: rng.random_range(lo..=hi),
                edge_cpu: cfg.edge_cpu,
                accuracy_ratio: cfg.accuracy_ratio,
                edge_accuracy: cfg.edge_accuracy,
            }
        })
        .collect();
    let rates: Vec<f64> = (0..cases).map(|_| 10f64.powf(rng.random_range(4.0..8.0))).collect();
    let opts = FpOptions {
        tol: 1e-12,
        max_iter: 200,
    };
    let st = solve_offload(&OffloadPlan::uniform(cases, 0.5), &rates, &tasks, opts)?;
    let worst = (0..cases)
        .into_par_iter()
        .map(|m| {
            let ours = safety_coefficient(m, st.rho.rho[m], rates[m], &tasks[m]).unwrap_or(f64::NEG_INFINITY);
            let grid = offload_grid_max(&tasks[m], rates[m], 100_000);
            ((grid - ours) / grid).max(0.0)
        })
        .reduce(|| 0.0, f64::max);
    Ok(Check::new("offload vs grid", worst, OFFLOAD_TOL))
}

/// Best joint objective over every binary assignment, with `ρ` re-solved.
pub fn exhaustive_spectrum(sys: &System, profile: &RicsProfile) -> Result<(f64, SpectrumAssignment)> {
    let (m, n) = (sys.num_cvs(), sys.num_pairs());
    let choices = n + 1;
    let mut best: Option<(f64, SpectrumAssignment)> = None;
    for code in 0..choices.pow(m as u32) {
        let mut alpha = SpectrumAssignment::unshared(m, n);
        let mut c = code;
        for row in alpha.alpha.iter_mut() {
            let pick = c % choices;
            c /= choices;
            if pick > 0 {
                row[pick - 1] = 1.0;
            }
        }
        if !sys.outage_violations(profile, &alpha, 0.0).is_empty() {
            continue;
        }
        let value = value_with_best_rho(sys, profile, &alpha)?;
        if best.as_ref().is_none_or(|(b, _)| value > *b) {
            best = Some((value, alpha));
        }
    }
    Ok(best.expect("the unshared assignment is always feasible"))
}

fn value_with_best_rho(sys: &System, profile: &RicsProfile, alpha: &SpectrumAssignment) -> Result<f64> {
    let rates = sys.v2i_rates(profile, alpha);
    let opts = FpOptions {
        tol: 1e-10,
        max_iter: 200,
    };
    let st = solve_offload(&OffloadPlan::uniform(sys.num_cvs(), 0.5), &rates, &sys.tasks, opts)?;
    Ok(sys.objective(&st.rho.rho, profile, alpha)?.value)
}

/// Relaxed SCA, rounding and repair versus enumeration, relative shortfall.
pub fn spectrum_shortfall(sys: &System, profile: &RicsProfile) -> Result<f64> {
    let (m, n) = (sys.num_cvs(), sys.num_pairs());
    let unshared = SpectrumAssignment::unshared(m, n);
    let rates = sys.v2i_rates(profile, &unshared);
    let rho = solve_offload(&OffloadPlan::uniform(m, 0.5), &rates, &sys.tasks, FpOptions::default())?.rho.rho;
    let refl = profile.reflection(sys.mode);
    let refr = profile.refraction(sys.mode);
    let prob = SpectrumProblem::new(sys, &refl, &refr, &rho, &unshared);
    let sol = solve_spectrum_sca(&prob, &unshared, SpectrumOptions::default());
    let mut alpha = crate::solver_spectrum::round_assignment(&sol.alpha, sys, &refr);
    repair(sys, &refr, &mut alpha);
    let ours = value_with_best_rho(sys, profile, &alpha)?;
    let (best, _) = exhaustive_spectrum(sys, profile)?;
    Ok(((best - ours) / best.abs()).max(0.0))
}

fn spectrum_checks(cfg: &ScenarioConfig) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for size in [1usize, 2] {
        let mut c = cfg.clone();
        c.num_cvs = size;
        c.num_v2v_pairs = size;
        let mut worst = 0.0f64;
        for seed in 0..10u64 {
            let (sc, ch): (_, ChannelSet) = realize(&c, seed)?;
            let sys = System::new(&c, &sc, &ch, SurfaceMode::Rics)?;
            let mut rng = stream_rng(seed, Stream::Init);
            let profile = RicsProfile::random_even(c.num_elements, &mut rng);
            worst = worst.max(spectrum_shortfall(&sys, &profile)?);
        }
        checks.push(Check::new(format!("spectrum rounding vs enumeration M=N={size}"), worst, SPECTRUM_TOL));
    }
    Ok(checks)
}
