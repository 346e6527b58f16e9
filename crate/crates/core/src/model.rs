//! The joint problem instance handed to every block solver.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, C64};
use crate::config::{LinkBudget, ScenarioConfig};
use crate::error::Result;
use crate::metrics::{
    self, expected_pair_interference, expected_v2v_sinr, outage_threshold, rate, safety_report,
    sinr_v2i_diag, tasks_for, CvTask, RicsProfile, SafetyReport, SpectrumAssignment, SurfaceMode,
};
use crate::scenario::Scenario;

/// One realized network together with the constants of the objective.
#[derive(Debug, Clone)]
pub struct System<'a> {
    pub channels: &'a ChannelSet,
    pub tasks: Vec<CvTask>,
    pub budget: LinkBudget,
    pub mode: SurfaceMode,
    /// Effective V2V SINR threshold of the outage surrogate.
    pub sinr_floor: f64,
    pub v2v_weight: f64,
    pub phase_v2v_weight: f64,
    pub psi_bounds: [f64; 2],
}

/// Value of the joint objective and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub sum_safety: f64,
    /// Sum V2V throughput, bit/s.
    pub v2v_rate: f64,
    /// `sum_safety + v2v_weight · v2v_rate / bandwidth`.
    pub value: f64,
}

impl<'a> System<'a> {
    pub fn new(
        cfg: &ScenarioConfig,
        sc: &Scenario,
        channels: &'a ChannelSet,
        mode: SurfaceMode,
    ) -> Result<Self> {
        Ok(Self {
            channels,
            tasks: tasks_for(cfg, sc),
            budget: cfg.budget(),
            mode,
            sinr_floor: outage_threshold(cfg.sinr_threshold, cfg.smooth_param, cfg.outage_cap)?,
            v2v_weight: cfg.v2v_weight,
            phase_v2v_weight: cfg.phase_v2v_weight,
            psi_bounds: cfg.psi_bounds,
        })
    }

    pub fn num_cvs(&self) -> usize {
        self.channels.num_cvs()
    }

    pub fn num_pairs(&self) -> usize {
        self.channels.num_pairs()
    }

    pub fn num_elements(&self) -> usize {
        self.channels.num_elements()
    }

    pub fn v2i_rates(&self, profile: &RicsProfile, alpha: &SpectrumAssignment) -> Vec<f64> {
        let refl = profile.reflection(self.mode);
        (0..self.num_cvs())
            .map(|m| {
                rate(
                    sinr_v2i_diag(m, self.channels, &refl, alpha, &self.budget),
                    self.budget.bandwidth,
                )
            })
            .collect()
    }

    pub fn v2v_rate(&self, profile: &RicsProfile, alpha: &SpectrumAssignment) -> f64 {
        metrics::v2v_sum_rate(self.channels, &profile.refraction(self.mode), alpha, &self.budget)
    }

    pub fn report(
        &self,
        rho: &[f64],
        profile: &RicsProfile,
        alpha: &SpectrumAssignment,
    ) -> Result<SafetyReport> {
        safety_report(rho, &self.v2i_rates(profile, alpha), &self.tasks)
    }

    pub fn objective(
        &self,
        rho: &[f64],
        profile: &RicsProfile,
        alpha: &SpectrumAssignment,
    ) -> Result<Objective> {
        let sum_safety = self.report(rho, profile, alpha)?.sum_safety;
        let v2v_rate = self.v2v_rate(profile, alpha);
        Ok(Objective {
            sum_safety,
            v2v_rate,
            value: sum_safety + self.v2v_weight * v2v_rate / self.budget.bandwidth,
        })
    }

    /// Expected interference gains `E_mn` under `refraction`, `[cv][pair]`.
    pub fn expected_interference(&self, refraction: &[C64]) -> Vec<Vec<f64>> {
        (0..self.num_cvs())
            .map(|m| {
                (0..self.num_pairs())
                    .map(|n| expected_pair_interference(m, n, self.channels, refraction))
                    .collect()
            })
            .collect()
    }

    /// Interference budget of pair `n`: the largest `Σ_m α_mn P_m E_mn`
    /// that keeps the expected SINR at the floor.
    pub fn interference_allowance(&self, n: usize) -> f64 {
        self.budget.v2v_power * self.channels.stats.gain_n[n] / self.sinr_floor - self.budget.noise
    }

    pub fn expected_sinrs(&self, profile: &RicsProfile, alpha: &SpectrumAssignment) -> Vec<f64> {
        let refr = profile.refraction(self.mode);
        (0..self.num_pairs())
            .map(|n| expected_v2v_sinr(n, self.channels, &refr, alpha, &self.budget))
            .collect()
    }

    /// Pairs whose expected SINR falls below the floor by more than `slack`.
    pub fn outage_violations(
        &self,
        profile: &RicsProfile,
        alpha: &SpectrumAssignment,
        slack: f64,
    ) -> Vec<usize> {
        self.expected_sinrs(profile, alpha)
            .iter()
            .enumerate()
            .filter(|(n, s)| {
                alpha.pair_load(*n) > 0.0 && **s < self.sinr_floor - slack
            })
            .map(|(n, _)| n)
            .collect()
    }

    /// Scales down shares on every pair whose outage surrogate is violated.
    pub fn repair_outage(&self, profile: &RicsProfile, alpha: &mut SpectrumAssignment) {
        let expected = self.expected_interference(&profile.refraction(self.mode));
        repair_columns(self, &expected, alpha);
    }
}

/// Column-wise repair against precomputed expected interference gains.
pub(crate) fn repair_columns(sys: &System, expected: &[Vec<f64>], alpha: &mut SpectrumAssignment) {
    let p = sys.budget.cv_power;
    for n in 0..sys.num_pairs() {
        let load: f64 = (0..sys.num_cvs()).map(|m| alpha.alpha[m][n] * p * expected[m][n]).sum();
        let allowance = sys.interference_allowance(n);
        if load <= allowance {
            continue;
        }
        if alpha.binary {
            // Drop the strongest interferers until the pair is safe.
            let mut order: Vec<usize> = (0..sys.num_cvs()).filter(|&m| alpha.alpha[m][n] > 0.0).collect();
            order.sort_by(|&a, &b| expected[b][n].total_cmp(&expected[a][n]));
            let mut load = load;
            for m in order {
                if load <= allowance {
                    break;
                }
                load -= p * expected[m][n];
                alpha.alpha[m][n] = 0.0;
            }
        } else {
            let scale = if allowance > 0.0 { allowance / load } else { 0.0 };
            // A hair under the boundary so the closed constraint survives rounding.
            let scale = scale * (1.0 - 1e-12);
            for row in alpha.alpha.iter_mut() {
                row[n] *= scale;
            }
        }
    }
}
