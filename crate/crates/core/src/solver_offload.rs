//! Offloading ratios by the quadratic transform of the safety ratio.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{avg_accuracy, delay_breakpoint, delays, safety_coefficient, CvTask, OffloadPlan};

/// Iterate of the fractional-programming loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpState {
    pub mu: Vec<f64>,
    pub rho: OffloadPlan,
    /// Sum safety at `rho`.
    pub objective: f64,
    pub iter: usize,
    /// Sum safety after every iteration.
    pub trace: Vec<f64>,
    /// Set when the loop stopped on the iteration cap.
    pub hit_cap: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpOptions {
    /// Relative improvement at or below which the loop stops.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 50 }
    }
}

/// Golden-section tolerance on ρ.
const RHO_TOL: f64 = 1e-10;

fn numerator(rho: f64, task: &CvTask) -> f64 {
    avg_accuracy(rho, task.accuracy_ratio, task.edge_accuracy)
}

fn total_delay(rho: f64, rate: f64, task: &CvTask) -> f64 {
    let local = (1.0 - rho) * task.local_time();
    let offload = if rho > 0.0 { rho * task.offload_time(rate) } else { 0.0 };
    local.max(offload)
}

/// `μ_m = sqrt(Ã_m(ρ_m)) / τ_m(ρ_m)` per CV.
pub fn update_mu(rho: &[f64], rates: &[f64], tasks: &[CvTask]) -> Result<Vec<f64>> {
    tasks
        .iter()
        .enumerate()
        .map(|(m, task)| {
            let d = delays(m, rho[m], rates[m], task)?;
            if !(d.total > 0.0) {
                return Err(Error::DegenerateDelay { cv: m });
            }
            Ok(numerator(rho[m], task).sqrt() / d.total)
        })
        .collect()
}

/// `2μ sqrt(Ã(ρ)) − μ² τ(ρ)`.
pub fn quad_surrogate(mu: f64, rho: f64, rate: f64, task: &CvTask) -> f64 {
    2.0 * mu * numerator(rho, task).sqrt() - mu * mu * total_delay(rho, rate, task)
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > RHO_TOL {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    // The surrogate may peak at an end point; compare explicitly.
    [0.0, 1.0, mid]
        .into_iter()
        .max_by(|a, b| f(*a).total_cmp(&f(*b)))
        .unwrap_or(mid)
}

/// Per-CV maximizer of the surrogate over `[0, 1]`.
///
/// With `μ = 0` every ρ ties; the delay-balancing point is returned.
pub fn maximize_rho_given_mu(mu: &[f64], rates: &[f64], tasks: &[CvTask]) -> OffloadPlan {
    let rho = tasks
        .iter()
        .enumerate()
        .map(|(m, task)| {
            if !(rates[m] > 0.0) {
                return 0.0;
            }
            if mu[m] == 0.0 {
                return delay_breakpoint(rates[m], task);
            }
            golden_max(|r| quad_surrogate(mu[m], r, rates[m], task), 0.0, 1.0)
        })
        .collect();
    OffloadPlan { rho }
}

pub fn sum_safety(rho: &[f64], rates: &[f64], tasks: &[CvTask]) -> Result<f64> {
    tasks
        .iter()
        .enumerate()
        .map(|(m, t)| safety_coefficient(m, rho[m], rates[m], t))
        .sum()
}

/// Alternates μ and ρ updates until the relative gain drops to `opts.tol`.
pub fn solve_offload(
    initial: &OffloadPlan,
    rates: &[f64],
    tasks: &[CvTask],
    opts: FpOptions,
) -> Result<FpState> {
    // A link without rate cannot carry any share of the task.
    let mut rho: Vec<f64> = initial
        .rho
        .iter()
        .zip(rates)
        .map(|(r, rate)| if *rate > 0.0 { r.clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let mut objective = sum_safety(&rho, rates, tasks)?;
    let mut mu = vec![0.0; tasks.len()];
    let mut trace = Vec::new();
    let mut iter = 0;
    let mut hit_cap = true;
    while iter < opts.max_iter {
        iter += 1;
        mu = update_mu(&rho, rates, tasks)?;
        let next = maximize_rho_given_mu(&mu, rates, tasks).rho;
        let value = sum_safety(&next, rates, tasks)?;
        let gain = value - objective;
        // The transform never loses ground up to search precision.
        if value >= objective {
            rho = next;
            objective = value;
        }
        trace.push(objective);
        if gain <= opts.tol * objective.abs() {
            hit_cap = false;
            break;
        }
    }
    Ok(FpState {
        mu,
        rho: OffloadPlan { rho },
        objective,
        iter,
        trace,
        hit_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn task(f: f64) -> CvTask {
        CvTask {
            bits: 15e6,
            cycles: 1.5e9,
            local_cpu: f,
            edge_cpu: 1e10,
            accuracy_ratio: 0.8,
            edge_accuracy: 0.9,
        }
    }

    #[test]
    fn mu_at_zero_offload() {
        let t = task(2e9);
        let mu = update_mu(&[0.0], &[1e7], &[t]).unwrap();
        let want = (0.8f64 * 0.9).sqrt() * 2e9 / 1.5e9;
        assert!((mu[0] - want).abs() < 1e-12);
    }

    #[test]
    fn surrogate_fixed_point_equals_ratio() {
        let t = task(1.3e9);
        for rho in [0.0, 0.2, 0.6, 1.0] {
            let mu = update_mu(&[rho], &[1.2e7], &[t]).unwrap()[0];
            let s = safety_coefficient(0, rho, 1.2e7, &t).unwrap();
            assert!((quad_surrogate(mu, rho, 1.2e7, &t) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_mu_returns_breakpoint() {
        let t = task(1e9);
        let plan = maximize_rho_given_mu(&[0.0], &[1.5e7], &[t]);
        let a = t.local_time();
        let b = t.offload_time(1.5e7);
        assert!((plan.rho[0] - a / (a + b)).abs() < 1e-15);
    }

    #[test]
    fn free_offloading_goes_all_in() {
        let t = CvTask {
            edge_cpu: 1e30,
            ..task(1e9)
        };
        let mu = update_mu(&[0.5], &[1e30], &[t]).unwrap();
        let plan = maximize_rho_given_mu(&mu, &[1e30], &[t]);
        assert!(plan.rho[0] > 1.0 - 1e-6);
    }

    #[test]
    fn infinite_tolerance_runs_once() {
        let t = task(2e9);
        let opts = FpOptions { tol: f64::INFINITY, max_iter: 50 };
        let st = solve_offload(&OffloadPlan::uniform(1, 0.1), &[1e7], &[t], opts).unwrap();
        assert_eq!(st.iter, 1);
        assert!(!st.hit_cap);
    }

    #[test]
    fn zero_rate_stays_local() {
        let t = task(2e9);
        let st = solve_offload(&OffloadPlan::uniform(1, 0.7), &[0.0], &[t], FpOptions::default()).unwrap();
        assert_eq!(st.rho.rho[0], 0.0);
    }
}
