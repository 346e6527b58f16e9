//! The alternating outer loop over offloading, spectrum and surface blocks.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::metrics::{OffloadPlan, RicsProfile, SafetyReport, SpectrumAssignment};
use crate::model::{Objective, System};
use crate::solver_amplitude::{solve_amplitude_gd, GdOptions, LsProblem};
use crate::solver_offload::{solve_offload, FpOptions};
use crate::solver_phase::{solve_phases, PhaseOptions};
use crate::solver_spectrum::{coordinate_search, score_assignment, repair, round_assignment, solve_spectrum_sca, SpectrumOptions, SpectrumProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OffloadPolicy {
    Optimize,
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpectrumPolicy {
    Optimize,
    /// Kept as given, apart from outage repairs.
    Fixed(SpectrumAssignment),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PhasePolicy {
    Optimize,
    /// Keep the random initial phases and the even split.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PsiPolicy {
    Optimize,
    Constant(f64),
    /// Fresh uniform draw in `[lo, hi]` at every refresh.
    Redraw { lo: f64, hi: f64 },
}

/// How each block is handled in one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    pub offload: OffloadPolicy,
    pub spectrum: SpectrumPolicy,
    pub phase: PhasePolicy,
    pub psi: PsiPolicy,
}

impl Policy {
    pub fn full() -> Self {
        Self {
            offload: OffloadPolicy::Optimize,
            spectrum: SpectrumPolicy::Optimize,
            phase: PhasePolicy::Optimize,
            psi: PsiPolicy::Optimize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AioaOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub fp: FpOptions,
    pub spectrum: SpectrumOptions,
    pub phase: PhaseOptions,
    pub gd: GdOptions,
    /// Cap on binary row sweeps after each relaxed spectrum solve.
    pub search_sweeps: usize,
}

impl AioaOptions {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            tol: cfg.aioa_tol,
            max_outer: cfg.max_outer_iters,
            fp: FpOptions { tol: cfg.aioa_tol, max_iter: 50 },
            spectrum: SpectrumOptions { tol: cfg.aioa_tol, ..SpectrumOptions::default() },
            phase: PhaseOptions::default(),
            gd: GdOptions {
                tol: cfg.gd_tol,
                rate: cfg.gd_rate,
                ..GdOptions::default()
            },
            search_sweeps: 10,
        }
    }
}

/// State after one outer cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub sum_safety: f64,
    pub sum_v2v_rate: f64,
    /// Largest relative shortfall of an expected V2V SINR below the floor.
    pub outage_residual: f64,
    pub wall_ms: f64,
    pub psi: Vec<f64>,
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    pub iterations: Vec<IterationRecord>,
    pub rho: OffloadPlan,
    pub alpha: SpectrumAssignment,
    pub profile: RicsProfile,
    pub report: SafetyReport,
    pub objective: Objective,
    pub sum_v2v_rate: f64,
    pub outer_iters: usize,
    pub converged: bool,
    /// Sub-solver caps that were hit, one note per event.
    pub flags: Vec<String>,
}

impl SolverTrace {
    pub fn objective_trace(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.objective).collect()
    }
}

/// Relative-improvement stop rule; `trace` holds one objective per cycle.
///
/// Converged once the last relative gain is strictly below `tol`.
pub fn check_convergence(trace: &[f64], tol: f64) -> bool {
    match trace {
        [.., prev, last] => {
            let gain = last - prev;
            if gain == 0.0 {
                return true;
            }
            gain / last.abs() < tol
        }
        _ => false,
    }
}

/// Operation-count model `I (K M + M N + (L+1)^3.5 + L^3.5)`.
pub fn complexity_estimate(outer: usize, fp_iters: usize, m: usize, n: usize, l: usize) -> f64 {
    let l = l as f64;
    outer as f64 * ((fp_iters * m) as f64 + (m * n) as f64 + (l + 1.0).powf(3.5) + l.powf(3.5))
}

fn outage_residual(sys: &System, profile: &RicsProfile, alpha: &SpectrumAssignment) -> f64 {
    sys.expected_sinrs(profile, alpha)
        .iter()
        .enumerate()
        .filter(|(n, _)| alpha.pair_load(*n) > 0.0)
        .map(|(_, s)| (1.0 - s / sys.sinr_floor).max(0.0))
        .fold(0.0, f64::max)
}

fn draw_psi<R: Rng + ?Sized>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| if hi > lo { rng.random_range(lo..=hi) } else { lo }).collect()
}

/// Runs the alternating loop for `policy`.
///
/// `init_rng` provides the random starting phases and `scheme_rng` any
/// randomness a policy needs later. From the second cycle on a block update
/// is kept only if it does not lower the joint objective.
pub fn run_aioa<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    sys: &System,
    policy: &Policy,
    opts: &AioaOptions,
    init_rng: &mut R1,
    scheme_rng: &mut R2,
) -> Result<SolverTrace> {
    let (m_count, n_count, len) = (sys.num_cvs(), sys.num_pairs(), sys.num_elements());
    let mode = sys.mode;
    let mut flags = Vec::new();

    let mut rho = match &policy.offload {
        OffloadPolicy::Optimize => vec![0.5; m_count],
        OffloadPolicy::Fixed(r) => r.clone(),
    };
    let mut profile = RicsProfile::random_even(len, init_rng);
    match policy.psi {
        PsiPolicy::Optimize => {}
        PsiPolicy::Constant(c) => profile.psi = vec![c; len],
        PsiPolicy::Redraw { lo, hi } => profile.psi = draw_psi(scheme_rng, len, lo, hi),
    }
    let mut alpha = match &policy.spectrum {
        SpectrumPolicy::Optimize => SpectrumAssignment::unshared(m_count, n_count),
        SpectrumPolicy::Fixed(a) => a.clone(),
    };
    sys.repair_outage(&profile, &mut alpha);

    let mut current = sys.objective(&rho, &profile, &alpha)?;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let start = Instant::now();

    for k in 1..=opts.max_outer {
        let guarded = k >= 2;
        let keep = |cand: &Objective, cur: &Objective| !guarded || cand.value >= cur.value;

        if let OffloadPolicy::Optimize = policy.offload {
            let rates = sys.v2i_rates(&profile, &alpha);
            let st = solve_offload(&OffloadPlan { rho: rho.clone() }, &rates, &sys.tasks, opts.fp)?;
            if st.hit_cap {
                flags.push(format!("cycle {k}: offload iteration cap"));
            }
            let cand = sys.objective(&st.rho.rho, &profile, &alpha)?;
            if keep(&cand, &current) {
                rho = st.rho.rho;
                current = cand;
            }
        }

        if let SpectrumPolicy::Optimize = policy.spectrum {
            let refl = profile.reflection(mode);
            let refr = profile.refraction(mode);
            let prob = SpectrumProblem::new(sys, &refl, &refr, &rho, &alpha);
            let sol = solve_spectrum_sca(&prob, &alpha, opts.spectrum);
            if !sol.converged {
                flags.push(format!("cycle {k}: spectrum SCA cap"));
            }
            let mut relaxed = sol.alpha;
            repair(sys, &refr, &mut relaxed);
            // Offloading follows the new rates when fixed ratios are not imposed.
            let fp = match policy.offload {
                OffloadPolicy::Optimize => Some(opts.fp),
                OffloadPolicy::Fixed(_) => None,
            };
            let mut best = score_assignment(sys, &profile, &rho, relaxed, fp)?;
            let searched = coordinate_search(sys, &profile, &rho, &best.alpha, fp, opts.search_sweeps)?;
            if searched.objective.value > best.objective.value {
                best = searched;
            }
            if keep(&best.objective, &current) {
                alpha = best.alpha;
                rho = best.rho;
                current = best.objective;
            }
        }

        if policy.phase == PhasePolicy::Optimize && mode.reflects() {
            let sol = solve_phases(sys, &alpha, &profile, opts.phase);
            if sol.hit_cap {
                flags.push(format!("cycle {k}: phase round cap"));
            }
            let mut cand_alpha = alpha.clone();
            sys.repair_outage(&sol.profile, &mut cand_alpha);
            let cand = sys.objective(&rho, &sol.profile, &cand_alpha)?;
            if keep(&cand, &current) {
                profile = sol.profile;
                alpha = cand_alpha;
                current = cand;
            }
        }

        if mode.refracts() {
            let new_psi = match policy.psi {
                PsiPolicy::Optimize => {
                    let prob = LsProblem::new(sys, &alpha, &profile);
                    let sol = solve_amplitude_gd(&prob, len, sys.psi_bounds, opts.gd);
                    if sol.hit_cap {
                        flags.push(format!("cycle {k}: amplitude iteration cap"));
                    }
                    Some(sol.psi)
                }
                PsiPolicy::Constant(_) => None,
                PsiPolicy::Redraw { lo, hi } => Some(draw_psi(scheme_rng, len, lo, hi)),
            };
            if let Some(psi) = new_psi {
                let mut cand_profile = profile.clone();
                cand_profile.psi = psi;
                let mut cand_alpha = alpha.clone();
                sys.repair_outage(&cand_profile, &mut cand_alpha);
                let cand = sys.objective(&rho, &cand_profile, &cand_alpha)?;
                let forced = matches!(policy.psi, PsiPolicy::Redraw { .. });
                if forced || keep(&cand, &current) {
                    profile = cand_profile;
                    alpha = cand_alpha;
                    current = cand;
                }
            }
        }

        records.push(IterationRecord {
            iteration: k,
            objective: current.value,
            sum_safety: current.sum_safety,
            sum_v2v_rate: current.v2v_rate,
            outage_residual: outage_residual(sys, &profile, &alpha),
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            psi: profile.psi.clone(),
        });
        let trace: Vec<f64> = records.iter().map(|r| r.objective).collect();
        if k >= 2 && check_convergence(&trace, opts.tol) {
            converged = true;
            break;
        }
    }

    let binary = round_assignment(&alpha, sys, &profile.refraction(mode));
    alpha = binary;
    if let OffloadPolicy::Optimize = policy.offload {
        let rates = sys.v2i_rates(&profile, &alpha);
        let st = solve_offload(&OffloadPlan { rho: rho.clone() }, &rates, &sys.tasks, opts.fp)?;
        rho = st.rho.rho;
    }
    let report = sys.report(&rho, &profile, &alpha)?;
    let objective = sys.objective(&rho, &profile, &alpha)?;
    Ok(SolverTrace {
        outer_iters: records.len(),
        iterations: records,
        rho: OffloadPlan { rho },
        alpha,
        profile,
        report,
        sum_v2v_rate: objective.v2v_rate,
        objective,
        converged,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_rule() {
        assert!(check_convergence(&[2.0, 2.0], 1e-3));
        assert!(!check_convergence(&[0.5, 1.0], 0.5));
        assert!(!check_convergence(&[1.0, 1.1], 1e-3));
        assert!(check_convergence(&[1.0, 1.1, 1.1005], 1e-3));
        assert!(!check_convergence(&[1.0], 1e-3));
    }

    #[test]
    fn complexity_unit_case() {
        let c = complexity_estimate(1, 1, 1, 1, 1);
        assert!((c - (3.0 + 2f64.powf(3.5))).abs() < 1e-12);
        assert!((c - 14.3137).abs() < 1e-3);
    }
}
