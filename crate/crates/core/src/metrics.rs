//! Link quality, delay, accuracy and safety metrics, plus the outage surrogate.

use std::f64::consts::{FRAC_PI_2, TAU};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelSet, C64};
use crate::config::{LinkBudget, ScenarioConfig};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Which surface paths exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SurfaceMode {
    /// Reflection towards the BS and refraction towards the V2V receivers.
    Rics,
    /// Reflection only; the refracted path is absent.
    ReflectOnly,
    /// No surface at all.
    Off,
}

impl SurfaceMode {
    pub fn reflects(self) -> bool {
        !matches!(self, SurfaceMode::Off)
    }

    pub fn refracts(self) -> bool {
        matches!(self, SurfaceMode::Rics)
    }
}

/// Maps an angle into `(0, 2π]`.
pub fn normalize_angle(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r == 0.0 {
        TAU
    } else {
        r
    }
}

/// Per-element surface configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicsProfile {
    pub theta_r: Vec<f64>,
    pub theta_t: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub beta_t: Vec<f64>,
    pub psi: Vec<f64>,
}

impl RicsProfile {
    /// Even energy split, refraction leading reflection by a quarter turn,
    /// uniformly random reflection phases, unit amplitude factors.
    pub fn random_even<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let theta_r: Vec<f64> = (0..len)
            .map(|_| normalize_angle(rng.random_range(0.0..TAU)))
            .collect();
        let theta_t = theta_r.iter().map(|t| normalize_angle(t + FRAC_PI_2)).collect();
        Self {
            theta_r,
            theta_t,
            beta_r: vec![0.5; len],
            beta_t: vec![0.5; len],
            psi: vec![1.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.theta_r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_r.is_empty()
    }

    /// Reflection diagonal `sqrt(β_r) e^{jθ_r}`; zero when the mode has no surface.
    pub fn reflection(&self, mode: SurfaceMode) -> Vec<C64> {
        if !mode.reflects() {
            return vec![C64::new(0.0, 0.0); self.len()];
        }
        self.beta_r
            .iter()
            .zip(&self.theta_r)
            .map(|(b, t)| C64::from_polar(b.sqrt(), *t))
            .collect()
    }

    /// Refraction diagonal `Ψ sqrt(β_t) e^{jθ_t}`; zero unless the mode refracts.
    pub fn refraction(&self, mode: SurfaceMode) -> Vec<C64> {
        if !mode.refracts() {
            return vec![C64::new(0.0, 0.0); self.len()];
        }
        self.beta_t
            .iter()
            .zip(&self.theta_t)
            .zip(&self.psi)
            .map(|((b, t), p)| C64::from_polar(p * b.sqrt(), *t))
            .collect()
    }

    /// Largest deviation from `β_r + β_t = 1`.
    pub fn energy_residual(&self) -> f64 {
        self.beta_r
            .iter()
            .zip(&self.beta_t)
            .map(|(r, t)| (r + t - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Largest distance of `|θ_t − θ_r|` from the set `{π/2, 3π/2}`.
    pub fn coupling_residual(&self) -> f64 {
        self.theta_t
            .iter()
            .zip(&self.theta_r)
            .map(|(t, r)| {
                let d = (t - r).abs();
                (d - FRAC_PI_2).abs().min((d - 3.0 * FRAC_PI_2).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Checks the hardware constraints and amplitude bounds.
    pub fn audit(&self, psi_bounds: [f64; 2], tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.energy_residual() > tol {
            out.push(format!("energy split off by {:e}", self.energy_residual()));
        }
        if self.coupling_residual() > tol {
            out.push(format!("phase coupling off by {:e}", self.coupling_residual()));
        }
        let in_range = |x: &f64| *x > 0.0 && *x <= TAU + tol;
        if !self.theta_r.iter().chain(&self.theta_t).all(in_range) {
            out.push("phase outside (0, 2π]".into());
        }
        let beta_ok = |b: &f64| (-tol..=1.0 + tol).contains(b);
        if !self.beta_r.iter().chain(&self.beta_t).all(beta_ok) {
            out.push("energy share outside [0,1]".into());
        }
        let [lo, hi] = psi_bounds;
        if !self.psi.iter().all(|p| *p >= lo - tol && *p <= hi + tol) {
            out.push("amplitude factor outside its bounds".into());
        }
        out
    }
}

/// Fraction of each task processed at the edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffloadPlan {
    pub rho: Vec<f64>,
}

impl OffloadPlan {
    pub fn uniform(m: usize, rho: f64) -> Self {
        Self { rho: vec![rho; m] }
    }
}

/// Band-sharing matrix, `alpha[cv][pair]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumAssignment {
    pub alpha: Vec<Vec<f64>>,
    pub binary: bool,
}

impl SpectrumAssignment {
    pub fn unshared(m: usize, n: usize) -> Self {
        Self {
            alpha: vec![vec![0.0; n]; m],
            binary: true,
        }
    }

    pub fn num_cvs(&self) -> usize {
        self.alpha.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.alpha.first().map_or(0, Vec::len)
    }

    /// Total share of pair `n`'s use across all CV bands.
    pub fn pair_load(&self, n: usize) -> f64 {
        self.alpha.iter().map(|row| row[n]).sum()
    }

    pub fn audit(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (m, row) in self.alpha.iter().enumerate() {
            if row.iter().any(|a| *a < -tol || *a > 1.0 + tol) {
                out.push(format!("CV {m}: share outside [0,1]"));
            }
            if row.iter().sum::<f64>() > 1.0 + tol {
                out.push(format!("CV {m}: shares sum above 1"));
            }
            if self.binary && row.iter().any(|a| *a != 0.0 && *a != 1.0) {
                out.push(format!("CV {m}: non-binary share"));
            }
        }
        out
    }
}

/// Computation task of one CV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvTask {
    pub bits: f64,
    pub cycles: f64,
    pub local_cpu: f64,
    pub edge_cpu: f64,
    pub accuracy_ratio: f64,
    pub edge_accuracy: f64,
}

impl CvTask {
    pub fn local_time(&self) -> f64 {
        self.cycles / self.local_cpu
    }

    /// Full-task edge time at uplink rate `rate`.
    pub fn offload_time(&self, rate: f64) -> f64 {
        self.bits / rate + self.cycles / self.edge_cpu
    }
}

pub fn tasks_for(cfg: &ScenarioConfig, sc: &Scenario) -> Vec<CvTask> {
    sc.local_cpu
        .iter()
        .map(|&f| CvTask {
            bits: cfg.task_bits,
            cycles: cfg.task_cycles(),
            local_cpu: f,
            edge_cpu: cfg.edge_cpu,
            accuracy_ratio: cfg.accuracy_ratio,
            edge_accuracy: cfg.edge_accuracy,
        })
        .collect()
}

/// `|h_mB + h_RB Φ_r h_mR|²` for one CV.
pub fn v2i_gain(m: usize, ch: &ChannelSet, reflection: &[C64]) -> f64 {
    let cascade: C64 = ch
        .h_rb
        .iter()
        .zip(&ch.h_mr[m])
        .zip(reflection)
        .map(|((a, b), s)| a * s * b)
        .sum();
    (ch.h_mb[m] + cascade).norm_sqr()
}

/// `|h_mn + h_Rn^H Φ_t h_mR|²` for one CV and receiver.
pub fn v2v_interference_gain(m: usize, n: usize, ch: &ChannelSet, refraction: &[C64]) -> f64 {
    let cascade: C64 = ch.h_rn[n]
        .iter()
        .zip(&ch.h_mr[m])
        .zip(refraction)
        .map(|((a, b), s)| a.conj() * s * b)
        .sum();
    (ch.h_mn[m][n] + cascade).norm_sqr()
}

/// Interference plus noise seen by CV `m` at the BS.
pub fn v2i_interference(m: usize, ch: &ChannelSet, alpha: &SpectrumAssignment, b: &LinkBudget) -> f64 {
    alpha.alpha[m]
        .iter()
        .zip(&ch.h_nb)
        .map(|(a, h)| a * b.v2v_power * h.norm_sqr())
        .sum::<f64>()
        + b.noise
}

pub fn sinr_v2i_diag(
    m: usize,
    ch: &ChannelSet,
    reflection: &[C64],
    alpha: &SpectrumAssignment,
    b: &LinkBudget,
) -> f64 {
    b.cv_power * v2i_gain(m, ch, reflection) / v2i_interference(m, ch, alpha, b)
}

pub fn sinr_v2i(
    m: usize,
    ch: &ChannelSet,
    profile: &RicsProfile,
    mode: SurfaceMode,
    alpha: &SpectrumAssignment,
    b: &LinkBudget,
) -> f64 {
    sinr_v2i_diag(m, ch, &profile.reflection(mode), alpha, b)
}

pub fn sinr_v2v_diag(
    n: usize,
    ch: &ChannelSet,
    refraction: &[C64],
    alpha: &SpectrumAssignment,
    b: &LinkBudget,
) -> f64 {
    let interference: f64 = (0..ch.num_cvs())
        .filter(|&m| alpha.alpha[m][n] != 0.0)
        .map(|m| alpha.alpha[m][n] * b.cv_power * v2v_interference_gain(m, n, ch, refraction))
        .sum();
    b.v2v_power * ch.h_n[n].norm_sqr() / (interference + b.noise)
}

pub fn sinr_v2v(
    n: usize,
    ch: &ChannelSet,
    profile: &RicsProfile,
    mode: SurfaceMode,
    alpha: &SpectrumAssignment,
    b: &LinkBudget,
) -> f64 {
    sinr_v2v_diag(n, ch, &profile.refraction(mode), alpha, b)
}

/// Shannon rate in bit/s.
pub fn rate(sinr: f64, bandwidth: f64) -> f64 {
    bandwidth * sinr.log2_1p()
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

/// V2V throughput: each pair transmits on the bands it borrows.
pub fn v2v_sum_rate(
    ch: &ChannelSet,
    refraction: &[C64],
    alpha: &SpectrumAssignment,
    b: &LinkBudget,
) -> f64 {
    (0..ch.num_pairs())
        .map(|n| {
            let load = alpha.pair_load(n);
            if load == 0.0 {
                0.0
            } else {
                load * rate(sinr_v2v_diag(n, ch, refraction, alpha, b), b.bandwidth)
            }
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Delays {
    pub local: f64,
    pub offload: f64,
    pub total: f64,
}

pub fn delays(cv: usize, rho: f64, rate: f64, task: &CvTask) -> Result<Delays> {
    let local = (1.0 - rho) * task.local_time();
    let offload = if rho > 0.0 {
        if !(rate > 0.0) {
            return Err(Error::ZeroRateWithOffload { cv });
        }
        rho * task.offload_time(rate)
    } else {
        0.0
    };
    Ok(Delays {
        local,
        offload,
        total: local.max(offload),
    })
}

pub fn avg_accuracy(rho: f64, accuracy_ratio: f64, edge_accuracy: f64) -> f64 {
    (1.0 - rho) * accuracy_ratio * edge_accuracy + rho * edge_accuracy
}

pub fn safety_coefficient(cv: usize, rho: f64, rate: f64, task: &CvTask) -> Result<f64> {
    let d = delays(cv, rho, rate, task)?;
    if !(d.total > 0.0) {
        return Err(Error::DegenerateDelay { cv });
    }
    Ok(avg_accuracy(rho, task.accuracy_ratio, task.edge_accuracy) / d.total)
}

/// Offloading ratio that balances local and edge delay.
pub fn delay_breakpoint(rate: f64, task: &CvTask) -> f64 {
    let a = task.local_time();
    let b = task.offload_time(rate);
    if !b.is_finite() {
        return 0.0;
    }
    a / (a + b)
}

/// Safety reachable with an infinitely fast uplink.
pub fn max_attainable_safety(task: &CvTask) -> f64 {
    let local = task.local_time();
    let edge = task.cycles / task.edge_cpu;
    let rho = local / (local + edge);
    avg_accuracy(rho, task.accuracy_ratio, task.edge_accuracy) / ((1.0 - rho) * local)
}

/// Sigmoid `1/(1+e^{−ωx})`.
pub fn smooth_step(x: f64, omega: f64) -> f64 {
    let z = omega * x;
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `E|h_mn + h_Rn^H Φ h_mR|²` for Rician surface hops and a Rayleigh direct link.
///
/// `gain_direct` and `gain_cascade` are the power path gains; pass 1 for
/// normalized channels. `phi` is the refraction diagonal.
#[allow(clippy::too_many_arguments)]
pub fn expected_interference(
    gain_direct: f64,
    gain_cascade: f64,
    kappa_rn: f64,
    kappa_mr: f64,
    los_rn: &[C64],
    phi: &[C64],
    los_mr: &[C64],
) -> f64 {
    let h: C64 = los_rn
        .iter()
        .zip(phi)
        .zip(los_mr)
        .map(|((a, p), b)| a.conj() * p * b)
        .sum();
    let energy: f64 = phi.iter().map(|p| p.norm_sqr()).sum();
    let cascade = if kappa_rn.is_infinite() || kappa_mr.is_infinite() {
        // Only the LoS-LoS product survives in the limit.
        h.norm_sqr()
    } else {
        (kappa_rn * kappa_mr * h.norm_sqr() + (kappa_rn + kappa_mr + 1.0) * energy)
            / ((1.0 + kappa_rn) * (1.0 + kappa_mr))
    };
    gain_direct + gain_cascade * cascade
}

/// Expected interference power gain from CV `m` at receiver `n`.
pub fn expected_pair_interference(m: usize, n: usize, ch: &ChannelSet, refraction: &[C64]) -> f64 {
    let s = &ch.stats;
    expected_interference(
        s.gain_mn[m][n],
        s.gain_rn[n] * s.gain_mr[m],
        s.kappa,
        s.kappa,
        &s.los_rn[n],
        refraction,
        &s.los_mr[m],
    )
}

/// Ratio of expected desired power to expected interference plus noise.
pub fn expected_v2v_sinr(
    n: usize,
    ch: &ChannelSet,
    refraction: &[C64],
    alpha: &SpectrumAssignment,
    b: &LinkBudget,
) -> f64 {
    let interference: f64 = (0..ch.num_cvs())
        .filter(|&m| alpha.alpha[m][n] != 0.0)
        .map(|m| alpha.alpha[m][n] * b.cv_power * expected_pair_interference(m, n, ch, refraction))
        .sum();
    b.v2v_power * ch.stats.gain_n[n] / (interference + b.noise)
}

/// Effective SINR threshold `γ_th + ln(1/P_out − 1)/ω`.
pub fn outage_threshold(sinr_threshold: f64, omega: f64, outage_cap: f64) -> Result<f64> {
    if !(outage_cap > 0.0 && outage_cap < 1.0) {
        return Err(Error::Domain(format!("outage probability {outage_cap} not in (0,1)")));
    }
    if omega.is_infinite() {
        return Ok(sinr_threshold);
    }
    Ok(sinr_threshold + (1.0 / outage_cap - 1.0).ln() / omega)
}

pub fn check_outage_constraint(expected_sinr: f64, threshold: f64) -> bool {
    expected_sinr >= threshold
}

/// Per-CV breakdown of one evaluated solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvSafety {
    pub rho: f64,
    pub rate: f64,
    pub local_delay: f64,
    pub offload_delay: f64,
    pub total_delay: f64,
    pub accuracy: f64,
    pub safety: f64,
    /// `safety` over the infinite-rate bound.
    pub normalized_safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyReport {
    pub per_cv: Vec<CvSafety>,
    pub sum_safety: f64,
}

impl SafetyReport {
    pub fn mean_safety(&self) -> f64 {
        self.sum_safety / self.per_cv.len() as f64
    }
}

pub fn safety_report(rho: &[f64], rates: &[f64], tasks: &[CvTask]) -> Result<SafetyReport> {
    let mut per_cv = Vec::with_capacity(tasks.len());
    for (m, task) in tasks.iter().enumerate() {
        let d = delays(m, rho[m], rates[m], task)?;
        let safety = safety_coefficient(m, rho[m], rates[m], task)?;
        per_cv.push(CvSafety {
            rho: rho[m],
            rate: rates[m],
            local_delay: d.local,
            offload_delay: d.offload,
            total_delay: d.total,
            accuracy: avg_accuracy(rho[m], task.accuracy_ratio, task.edge_accuracy),
            safety,
            normalized_safety: safety / max_attainable_safety(task),
        });
    }
    let sum_safety = per_cv.iter().map(|c| c.safety).sum();
    Ok(SafetyReport { per_cv, sum_safety })
}
