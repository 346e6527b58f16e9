//! Relaxed band sharing by log-sum-exp smoothing and successive convex
//! approximation, followed by outage-safe rounding.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::C64;
use crate::error::Result;
use crate::metrics::{v2i_gain, v2v_interference_gain, CvTask, OffloadPlan, RicsProfile, SpectrumAssignment};
use crate::model::{repair_columns, Objective, System};
use crate::solver_offload::{solve_offload, FpOptions};

/// Numerically stable `ln(e^a + e^b)`.
pub fn lse_delay_bound(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    if hi == f64::INFINITY {
        return hi;
    }
    hi + ((a - hi).exp() + (b - hi).exp()).ln()
}

/// Weight of `b` in the gradient of [`lse_delay_bound`].
fn lse_weight(a: f64, b: f64) -> f64 {
    let hi = a.max(b);
    let ea = (a - hi).exp();
    let eb = (b - hi).exp();
    eb / (ea + eb)
}

/// Frozen data of one CV's uplink: desired power and per-pair interference.
#[derive(Debug, Clone)]
pub struct UplinkTerms {
    /// `P_m |h_mB + h_RB Φ_r h_mR|²`.
    pub signal: f64,
    /// `P_t |h_nB|²` per pair.
    pub interference: Vec<f64>,
    pub noise: f64,
    pub bandwidth: f64,
}

impl UplinkTerms {
    pub fn new(sys: &System, m: usize, reflection: &[C64]) -> Self {
        let b = &sys.budget;
        Self {
            signal: b.cv_power * v2i_gain(m, sys.channels, reflection),
            interference: sys
                .channels
                .h_nb
                .iter()
                .map(|h| b.v2v_power * h.norm_sqr())
                .collect(),
            noise: b.noise,
            bandwidth: b.bandwidth,
        }
    }

    fn load(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.interference).map(|(a, i)| a * i).sum::<f64>() + self.noise
    }
}

/// `(p, q)` with `p − q` equal to the uplink rate.
pub fn rate_dc_parts(terms: &UplinkTerms, row: &[f64]) -> (f64, f64) {
    let load = terms.load(row);
    let w = terms.bandwidth;
    (w * (terms.signal + load).log2(), w * load.log2())
}

/// First-order expansion of `q` at a fixed row.
#[derive(Debug, Clone)]
pub struct AffineSurrogate {
    pub at: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
}

impl AffineSurrogate {
    pub fn eval(&self, row: &[f64]) -> f64 {
        self.value
            + row
                .iter()
                .zip(&self.at)
                .zip(&self.gradient)
                .map(|((x, x0), g)| g * (x - x0))
                .sum::<f64>()
    }
}

pub fn taylor_linearize_q(terms: &UplinkTerms, row: &[f64]) -> AffineSurrogate {
    let load = terms.load(row);
    let scale = terms.bandwidth / (LN_2 * load);
    AffineSurrogate {
        at: row.to_vec(),
        value: terms.bandwidth * load.log2(),
        gradient: terms.interference.iter().map(|i| scale * i).collect(),
    }
}

/// Everything the relaxed subproblem needs, frozen at the block start.
#[derive(Debug, Clone)]
pub struct SpectrumProblem {
    pub uplinks: Vec<UplinkTerms>,
    pub tasks: Vec<CvTask>,
    pub rho: Vec<f64>,
    /// Per-CV weight of its smoothed delay.
    pub delay_weight: Vec<f64>,
    /// Per-share reward, `[cv][pair]`.
    pub reward: Vec<Vec<f64>>,
    /// `P_m E_mn` over pair `n`'s interference allowance, `[cv][pair]`.
    pub outage_cost: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub tol: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub penalty: f64,
    pub penalty_cap: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            tol: 1e-3,
            max_outer: 50,
            max_inner: 300,
            penalty: 1e3,
            penalty_cap: 1e6,
        }
    }
}

/// Result of the relaxed solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSolution {
    pub alpha: SpectrumAssignment,
    /// Penalized relaxed objective after every SCA step.
    pub trace: Vec<f64>,
    /// Outage penalty weight in force for each trace entry.
    pub penalties: Vec<f64>,
    pub converged: bool,
}

/// Approximate offloaded-delay floor protecting the `1/R` term.
const RATE_FLOOR: f64 = 1e-9;

impl SpectrumProblem {
    /// Builds the subproblem at the current point.
    ///
    /// Delay weights are `Ã/τ²` so that a unit drop in weighted delay is
    /// worth a unit of safety; V2V rewards are the single-interferer
    /// spectral efficiency scaled by the system's V2V weight.
    pub fn new(sys: &System, reflection: &[C64], refraction: &[C64], rho: &[f64], alpha: &SpectrumAssignment) -> Self {
        let (m_count, n_count) = (sys.num_cvs(), sys.num_pairs());
        let uplinks: Vec<UplinkTerms> = (0..m_count).map(|m| UplinkTerms::new(sys, m, reflection)).collect();
        let delay_weight = (0..m_count)
            .map(|m| {
                let task = &sys.tasks[m];
                let (p, q) = rate_dc_parts(&uplinks[m], &alpha.alpha[m]);
                let tau_l = (1.0 - rho[m]) * task.local_time();
                let tau_o = rho[m] * task.offload_time((p - q).max(RATE_FLOOR));
                let tau = tau_l.max(tau_o);
                let acc = crate::metrics::avg_accuracy(rho[m], task.accuracy_ratio, task.edge_accuracy);
                if tau > 0.0 { acc / (tau * tau) } else { 0.0 }
            })
            .collect();
        let b = &sys.budget;
        let reward = (0..m_count)
            .map(|m| {
                (0..n_count)
                    .map(|n| {
                        let i = b.cv_power * v2v_interference_gain(m, n, sys.channels, refraction);
                        let sinr = b.v2v_power * sys.channels.h_n[n].norm_sqr() / (i + b.noise);
                        sys.v2v_weight * sinr.ln_1p() / LN_2
                    })
                    .collect()
            })
            .collect();
        let expected = sys.expected_interference(refraction);
        let outage_cost = (0..m_count)
            .map(|m| {
                (0..n_count)
                    .map(|n| {
                        let allowance = sys.interference_allowance(n);
                        let load = b.cv_power * expected[m][n];
                        if allowance > 0.0 { load / allowance } else { f64::INFINITY }
                    })
                    .collect()
            })
            .collect();
        Self {
            uplinks,
            tasks: sys.tasks.clone(),
            rho: rho.to_vec(),
            delay_weight,
            reward,
            outage_cost,
        }
    }

    fn violation(&self, alpha: &[Vec<f64>], n: usize) -> f64 {
        let used: f64 = alpha.iter().zip(&self.outage_cost).map(|(row, c)| row[n] * c[n]).sum();
        (used - 1.0).max(0.0)
    }

    /// Smoothed objective; with `lin = None` the rate is exact.
    fn value(&self, alpha: &[Vec<f64>], lin: Option<&[AffineSurrogate]>, penalty: f64) -> f64 {
        let mut total = 0.0;
        for (m, row) in alpha.iter().enumerate() {
            let (p, q) = rate_dc_parts(&self.uplinks[m], row);
            let q = lin.map_or(q, |l| l[m].eval(row));
            let r = p - q;
            let task = &self.tasks[m];
            let tau_l = (1.0 - self.rho[m]) * task.local_time();
            let tau_o = if self.rho[m] > 0.0 {
                if r <= RATE_FLOOR {
                    return f64::INFINITY;
                }
                self.rho[m] * task.offload_time(r)
            } else {
                0.0
            };
            total += self.delay_weight[m] * lse_delay_bound(tau_l, tau_o);
            total -= row.iter().zip(&self.reward[m]).map(|(a, w)| a * w).sum::<f64>();
        }
        if penalty > 0.0 {
            let n_count = self.reward.first().map_or(0, Vec::len);
            for n in 0..n_count {
                let v = self.violation(alpha, n);
                total += penalty * v * v;
            }
        }
        total
    }

    /// Relaxed objective without penalty, exact rates.
    pub fn objective(&self, alpha: &SpectrumAssignment) -> f64 {
        self.value(&alpha.alpha, None, 0.0)
    }

    fn gradient(&self, alpha: &[Vec<f64>], lin: &[AffineSurrogate], penalty: f64) -> Vec<Vec<f64>> {
        let n_count = self.reward.first().map_or(0, Vec::len);
        let viol: Vec<f64> = (0..n_count).map(|n| self.violation(alpha, n)).collect();
        alpha
            .iter()
            .enumerate()
            .map(|(m, row)| {
                let up = &self.uplinks[m];
                let task = &self.tasks[m];
                let load = up.load(row);
                let (p, _) = rate_dc_parts(up, row);
                let r = p - lin[m].eval(row);
                let rho = self.rho[m];
                let tau_l = (1.0 - rho) * task.local_time();
                let coef = if rho > 0.0 && r > RATE_FLOOR {
                    let tau_o = rho * task.offload_time(r);
                    // d(lse)/dτ_o · dτ_o/dR
                    self.delay_weight[m] * lse_weight(tau_l, tau_o) * (-rho * task.bits / (r * r))
                } else {
                    0.0
                };
                let dp_scale = up.bandwidth / (LN_2 * (up.signal + load));
                (0..row.len())
                    .map(|n| {
                        let dr = dp_scale * up.interference[n] - lin[m].gradient[n];
                        coef * dr - self.reward[m][n] + 2.0 * penalty * viol[n] * self.outage_cost[m][n]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Euclidean projection of `y` onto `{0 ≤ x ≤ 1, Σx ≤ 1}`.
pub fn project_row(y: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = y.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        return clipped;
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            shift = t;
        }
    }
    y.iter().map(|v| (v - shift).max(0.0)).collect()
}

fn project(alpha: &[Vec<f64>]) -> Vec<Vec<f64>> {
    alpha.iter().map(|r| project_row(r)).collect()
}

fn sq_dist(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Projected gradient with Armijo backtracking on the convex surrogate.
fn solve_inner(prob: &SpectrumProblem, start: &[Vec<f64>], lin: &[AffineSurrogate], penalty: f64, max_iter: usize) -> Vec<Vec<f64>> {
    let mut x = start.to_vec();
    let mut fx = prob.value(&x, Some(lin), penalty);
    let mut step = 1e-2;
    for _ in 0..max_iter {
        let g = prob.gradient(&x, lin, penalty);
        let mut moved = false;
        let mut trial_step = step * 4.0;
        for _ in 0..60 {
            let cand: Vec<Vec<f64>> = x
                .iter()
                .zip(&g)
                .map(|(r, gr)| r.iter().zip(gr).map(|(a, d)| a - trial_step * d).collect())
                .collect();
            let cand = project(&cand);
            let dist = sq_dist(&cand, &x);
            if dist == 0.0 {
                break;
            }
            let fc = prob.value(&cand, Some(lin), penalty);
            if fc <= fx - 1e-4 * dist / trial_step {
                let gain = fx - fc;
                x = cand;
                fx = fc;
                step = trial_step;
                moved = gain > 1e-13 * fx.abs().max(1.0);
                break;
            }
            trial_step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}

/// SCA over the relaxed matrix starting from a feasible `alpha0`.
pub fn solve_spectrum_sca(prob: &SpectrumProblem, alpha0: &SpectrumAssignment, opts: SpectrumOptions) -> SpectrumSolution {
    let mut x = alpha0.alpha.clone();
    let mut penalty = opts.penalty;
    let mut current = prob.value(&x, None, penalty);
    let mut trace = vec![current];
    let mut penalties = vec![penalty];
    let mut converged = false;
    let mut last_violation = f64::INFINITY;
    for _ in 0..opts.max_outer {
        let lin: Vec<AffineSurrogate> = prob
            .uplinks
            .iter()
            .zip(&x)
            .map(|(u, row)| taylor_linearize_q(u, row))
            .collect();
        let next = solve_inner(prob, &x, &lin, penalty, opts.max_inner);
        let value = prob.value(&next, None, penalty);
        let change = (current - value).abs();
        x = next;
        current = value;
        trace.push(value);
        penalties.push(penalty);
        let n_count = prob.reward.first().map_or(0, Vec::len);
        let violation: f64 = (0..n_count).map(|n| prob.violation(&x, n)).fold(0.0, f64::max);
        if violation > 1e-9 && violation > 0.99 * last_violation && penalty < opts.penalty_cap {
            penalty = (penalty * 2.0).min(opts.penalty_cap);
            current = prob.value(&x, None, penalty);
        }
        last_violation = violation;
        if change <= opts.tol * current.abs() {
            converged = true;
            break;
        }
    }
    let mut alpha = SpectrumAssignment { alpha: x, binary: false };
    for row in alpha.alpha.iter_mut() {
        for v in row.iter_mut() {
            if *v < 1e-12 {
                *v = 0.0;
            }
        }
    }
    SpectrumSolution {
        alpha,
        trace,
        penalties,
        converged,
    }
}

/// Row-by-row rounding that never breaks an outage constraint.
///
/// A row keeps its largest share, raised to 1, only when that share is at
/// least one half and the pair's expected SINR stays at the floor given the
/// rows already fixed. Otherwise the row is cleared.
pub fn round_assignment(relaxed: &SpectrumAssignment, sys: &System, refraction: &[C64]) -> SpectrumAssignment {
    let expected = sys.expected_interference(refraction);
    let (m_count, n_count) = (relaxed.num_cvs(), relaxed.num_pairs());
    let mut out = SpectrumAssignment::unshared(m_count, n_count);
    let mut used = vec![0.0; n_count];
    for (m, (row, exp_row)) in relaxed.alpha.iter().zip(&expected).enumerate() {
        let Some((n, &a)) = row.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)) else {
            continue;
        };
        if a < 0.5 {
            continue;
        }
        let extra = sys.budget.cv_power * exp_row[n];
        if used[n] + extra <= sys.interference_allowance(n) {
            used[n] += extra;
            out.alpha[m][n] = 1.0;
        }
    }
    out
}

/// Clears binary shares or scales relaxed ones until every outage surrogate holds.
pub fn repair(sys: &System, refraction: &[C64], alpha: &mut SpectrumAssignment) {
    let expected = sys.expected_interference(refraction);
    repair_columns(sys, &expected, alpha);
}

/// Assignment together with the offloading ratios that best answer it.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredAssignment {
    pub alpha: SpectrumAssignment,
    pub rho: Vec<f64>,
    pub objective: Objective,
}

/// Joint objective of `alpha`; with `fp` set, `ρ` is first re-solved for
/// the new uplink rates, otherwise it stays at `rho`.
pub fn score_assignment(
    sys: &System,
    profile: &RicsProfile,
    rho: &[f64],
    alpha: SpectrumAssignment,
    fp: Option<FpOptions>,
) -> Result<ScoredAssignment> {
    let rho = match fp {
        Some(fp) => {
            let rates = sys.v2i_rates(profile, &alpha);
            solve_offload(&OffloadPlan { rho: rho.to_vec() }, &rates, &sys.tasks, fp)?.rho.rho
        }
        None => rho.to_vec(),
    };
    let objective = sys.objective(&rho, profile, &alpha)?;
    Ok(ScoredAssignment { alpha, rho, objective })
}

/// Row-wise best response over binary choices, starting from `start`.
///
/// Each row in turn is set to the partner (or none) with the largest joint
/// objective among choices that keep every outage surrogate satisfied.
/// Sweeps repeat until a full pass changes nothing or `max_sweeps` is hit.
pub fn coordinate_search(
    sys: &System,
    profile: &RicsProfile,
    rho: &[f64],
    start: &SpectrumAssignment,
    fp: Option<FpOptions>,
    max_sweeps: usize,
) -> Result<ScoredAssignment> {
    let refraction = profile.refraction(sys.mode);
    let expected = sys.expected_interference(&refraction);
    let (m_count, n_count) = (sys.num_cvs(), sys.num_pairs());
    let p = sys.budget.cv_power;
    let allowance: Vec<f64> = (0..n_count).map(|n| sys.interference_allowance(n)).collect();
    let mut alpha = round_assignment(start, sys, &refraction);
    let mut best = score_assignment(sys, profile, rho, alpha.clone(), fp)?;
    for _ in 0..max_sweeps {
        let mut changed = false;
        for m in 0..m_count {
            let current = alpha.alpha[m].iter().position(|a| *a > 0.0);
            for choice in (0..n_count).map(Some).chain([None]) {
                if choice == current {
                    continue;
                }
                if let Some(n) = choice {
                    let used: f64 = (0..m_count)
                        .filter(|&k| k != m)
                        .map(|k| alpha.alpha[k][n] * p * expected[k][n])
                        .sum();
                    if used + p * expected[m][n] > allowance[n] {
                        continue;
                    }
                }
                let mut cand = alpha.clone();
                cand.alpha[m].iter_mut().for_each(|a| *a = 0.0);
                if let Some(n) = choice {
                    cand.alpha[m][n] = 1.0;
                }
                let scored = score_assignment(sys, profile, &best.rho, cand, fp)?;
                if scored.objective.value > best.objective.value {
                    alpha = scored.alpha.clone();
                    best = scored;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(best)
}
