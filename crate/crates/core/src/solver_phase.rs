//! Coupled reflection/refraction coefficients by a penalized rank-one
//! beamformer ascent with per-element projections onto the hardware set.

use std::f64::consts::{FRAC_PI_2, LN_2};

use serde::{Deserialize, Serialize};

use crate::channel::{hadamard, C64};
use crate::metrics::{normalize_angle, RicsProfile, SpectrumAssignment, SurfaceMode};
use crate::model::System;

const J: C64 = C64::new(0.0, 1.0);

/// `h_RB ∘ h_mR`.
pub fn build_effective_channel(h_rb: &[C64], h_mr: &[C64]) -> Vec<C64> {
    hadamard(h_rb, h_mr)
}

/// Which quarter-turn offset links the two phases of an element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `θ_r = θ_t + π/2`.
    Lead,
    /// `θ_r = θ_t + 3π/2`.
    Lag,
}

impl Branch {
    /// `e^{j(θ_r − θ_t)}`.
    fn rotor(self) -> C64 {
        match self {
            Branch::Lead => J,
            Branch::Lag => -J,
        }
    }

    fn offset(self) -> f64 {
        match self {
            Branch::Lead => FRAC_PI_2,
            Branch::Lag => 3.0 * FRAC_PI_2,
        }
    }
}

/// Phase choice for one element and one branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseCandidate {
    pub branch: Branch,
    pub theta_t: f64,
    pub theta_r: f64,
    /// `Re(conj(u_t) e^{jθ_t}) + Re(conj(u_r) e^{jθ_r})`.
    pub value: f64,
}

/// Best coupled phases for amplitude-weighted targets `u_t`, `u_r`, per branch.
pub fn coupled_phase_update(u_t: C64, u_r: C64) -> [PhaseCandidate; 2] {
    [Branch::Lead, Branch::Lag].map(|branch| {
        let z = u_t.conj() + branch.rotor() * u_r.conj();
        let theta_t = normalize_angle(-z.arg());
        PhaseCandidate {
            branch,
            theta_t,
            theta_r: normalize_angle(theta_t + branch.offset()),
            value: z.norm(),
        }
    })
}

/// Maximizes `a sqrt(β_t) + b sqrt(β_r)` on `β_t + β_r = 1`, returning the square roots.
pub fn coupled_amplitude_update(a: f64, b: f64) -> (f64, f64) {
    let mut best = if a >= b { (1.0, 0.0) } else { (0.0, 1.0) };
    if a > 0.0 && b > 0.0 {
        let norm = a.hypot(b);
        best = (a / norm, b / norm);
    }
    best
}

/// Feasible element closest (in the linearized sense) to the targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementChoice {
    pub branch: Branch,
    pub theta_t: f64,
    pub theta_r: f64,
    pub sqrt_beta_t: f64,
    pub sqrt_beta_r: f64,
    /// `Re(conj(v_t) ṽ_t) + Re(conj(v_r) ṽ_r)`.
    pub value: f64,
}

impl ElementChoice {
    pub fn vt(&self) -> C64 {
        C64::from_polar(self.sqrt_beta_t, self.theta_t)
    }

    pub fn vr(&self) -> C64 {
        C64::from_polar(self.sqrt_beta_r, self.theta_r)
    }
}

/// Jointly optimal coupled phases and split for targets `v_t`, `v_r`.
///
/// On a branch the objective is `|x cos φ + y sin φ|` with `x = conj(v_t)`,
/// `y = rotor · conj(v_r)` and `φ ∈ [0, π/2]`. Its square is a sinusoid in
/// `2φ`, so the maximizer is found in closed form; the phase update then
/// aligns the combination. This is the common fixed point of alternating
/// [`coupled_phase_update`] and [`coupled_amplitude_update`].
pub fn coupled_element_update(v_t: C64, v_r: C64) -> ElementChoice {
    let mut winner: Option<ElementChoice> = None;
    for (idx, branch) in [Branch::Lead, Branch::Lag].into_iter().enumerate() {
        let x = v_t.conj();
        let y = branch.rotor() * v_r.conj();
        let half_diff = 0.5 * (x.norm_sqr() - y.norm_sqr());
        let cross = (x.conj() * y).re;
        let (cos, sin) = if cross > 0.0 {
            let two_phi = cross.atan2(half_diff);
            ((0.5 * two_phi).cos(), (0.5 * two_phi).sin())
        } else if x.norm_sqr() >= y.norm_sqr() {
            (1.0, 0.0)
        } else {
            (0.0, 1.0)
        };
        let cand = coupled_phase_update(cos * v_t, sin * v_r)[idx];
        let choice = ElementChoice {
            branch,
            theta_t: cand.theta_t,
            theta_r: cand.theta_r,
            sqrt_beta_t: cos,
            sqrt_beta_r: sin,
            value: cand.value,
        };
        if winner.is_none_or(|w| choice.value > w.value) {
            winner = Some(choice);
        }
    }
    winner.expect("two branches evaluated")
}

struct Interferer {
    /// `α_mn P_m`.
    weight: f64,
    direct: C64,
    /// `conj(h_Rn) ∘ Ψ ∘ h_mR`.
    cascade: Vec<C64>,
    /// Large-scale direct and cascade gains of the expectation.
    gain_direct: f64,
    gain_cascade: f64,
    /// `conj(los_Rn) ∘ Ψ ∘ los_mR`.
    los: Vec<C64>,
}

struct PairTerms {
    load: f64,
    signal: f64,
    allowance: f64,
    interferers: Vec<Interferer>,
}

/// Beamforming objective with spectrum and amplitude factors frozen.
pub struct PhaseProblem {
    refl: bool,
    refr: bool,
    direct_bs: Vec<C64>,
    cascade_bs: Vec<Vec<C64>>,
    /// `P_m / (interference + noise)` per CV.
    v2i_scale: Vec<f64>,
    pairs: Vec<PairTerms>,
    noise: f64,
    psi_sq: Vec<f64>,
    kappa: f64,
    v2v_weight: f64,
    outage_weight: f64,
}

/// Objective weight of a unit relative outage violation, squared.
pub const OUTAGE_WEIGHT: f64 = 1e3;

impl PhaseProblem {
    pub fn new(sys: &System, alpha: &SpectrumAssignment, psi: &[f64]) -> Self {
        let ch = sys.channels;
        let b = &sys.budget;
        let st = &ch.stats;
        let pairs = (0..sys.num_pairs())
            .filter(|&n| alpha.pair_load(n) > 0.0)
            .map(|n| PairTerms {
                load: alpha.pair_load(n),
                signal: b.v2v_power * ch.h_n[n].norm_sqr(),
                allowance: sys.interference_allowance(n),
                interferers: (0..sys.num_cvs())
                    .filter(|&m| alpha.alpha[m][n] > 0.0)
                    .map(|m| {
                        let scaled = |x: &[C64], y: &[C64]| -> Vec<C64> {
                            x.iter().zip(y).zip(psi).map(|((a, c), p)| a.conj() * c * *p).collect()
                        };
                        Interferer {
                            weight: alpha.alpha[m][n] * b.cv_power,
                            direct: ch.h_mn[m][n],
                            cascade: scaled(&ch.h_rn[n], &ch.h_mr[m]),
                            gain_direct: st.gain_mn[m][n],
                            gain_cascade: st.gain_rn[n] * st.gain_mr[m],
                            los: scaled(&st.los_rn[n], &st.los_mr[m]),
                        }
                    })
                    .collect(),
            })
            .collect();
        Self {
            refl: sys.mode.reflects(),
            refr: sys.mode.refracts(),
            direct_bs: ch.h_mb.clone(),
            cascade_bs: (0..sys.num_cvs()).map(|m| ch.bs_cascade(m)).collect(),
            v2i_scale: (0..sys.num_cvs())
                .map(|m| b.cv_power / crate::metrics::v2i_interference(m, ch, alpha, b))
                .collect(),
            pairs,
            noise: b.noise,
            psi_sq: psi.iter().map(|p| p * p).collect(),
            kappa: st.kappa,
            v2v_weight: sys.phase_v2v_weight,
            outage_weight: OUTAGE_WEIGHT,
        }
    }

    fn expectation(&self, it: &Interferer, v_t: &[C64]) -> (f64, C64) {
        let h: C64 = it.los.iter().zip(v_t).map(|(c, v)| c * v).sum();
        let energy: f64 = self.psi_sq.iter().zip(v_t).map(|(p, v)| p * v.norm_sqr()).sum();
        let k = self.kappa;
        let e = it.gain_direct
            + it.gain_cascade * (k * k * h.norm_sqr() + (2.0 * k + 1.0) * energy) / ((1.0 + k) * (1.0 + k));
        (e, h)
    }

    /// V2I and weighted V2V spectral efficiency minus the outage penalty.
    pub fn value(&self, v_t: &[C64], v_r: &[C64]) -> f64 {
        let mut total = 0.0;
        for (m, d) in self.direct_bs.iter().enumerate() {
            let c = if self.refl {
                d + self.cascade_bs[m].iter().zip(v_r).map(|(h, v)| h * v).sum::<C64>()
            } else {
                *d
            };
            total += (self.v2i_scale[m] * c.norm_sqr()).ln_1p() / LN_2;
        }
        for pair in &self.pairs {
            let mut den = self.noise;
            let mut expected = 0.0;
            for it in &pair.interferers {
                let i = if self.refr {
                    it.direct + it.cascade.iter().zip(v_t).map(|(h, v)| h * v).sum::<C64>()
                } else {
                    it.direct
                };
                den += it.weight * i.norm_sqr();
                if self.refr {
                    expected += it.weight * self.expectation(it, v_t).0;
                } else {
                    expected += it.weight * it.gain_direct;
                }
            }
            total += self.v2v_weight * pair.load * (pair.signal / den).ln_1p() / LN_2;
            let u = (expected / pair.allowance - 1.0).max(0.0);
            total -= self.outage_weight * u * u;
        }
        total
    }

    /// Steepest-ascent directions `(G_t, G_r)` with `G = ∂f/∂Re v + j ∂f/∂Im v`.
    pub fn gradient(&self, v_t: &[C64], v_r: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let len = v_r.len();
        let mut g_t = vec![C64::new(0.0, 0.0); len];
        let mut g_r = vec![C64::new(0.0, 0.0); len];
        if self.refl {
            for (m, d) in self.direct_bs.iter().enumerate() {
                let hb = &self.cascade_bs[m];
                let c = d + hb.iter().zip(v_r).map(|(h, v)| h * v).sum::<C64>();
                let s = self.v2i_scale[m];
                let coef = 2.0 * s / (LN_2 * (1.0 + s * c.norm_sqr()));
                for (g, h) in g_r.iter_mut().zip(hb) {
                    *g += coef * c * h.conj();
                }
            }
        }
        if self.refr {
            let k = self.kappa;
            for pair in &self.pairs {
                let mut den = self.noise;
                let mut expected = 0.0;
                let mut states = Vec::with_capacity(pair.interferers.len());
                for it in &pair.interferers {
                    let i = it.direct + it.cascade.iter().zip(v_t).map(|(h, v)| h * v).sum::<C64>();
                    den += it.weight * i.norm_sqr();
                    let (e, h) = self.expectation(it, v_t);
                    expected += it.weight * e;
                    states.push((i, h));
                }
                let gamma = pair.signal / den;
                let rate_coef = -2.0 * self.v2v_weight * pair.load * gamma / (LN_2 * (1.0 + gamma) * den);
                let u = (expected / pair.allowance - 1.0).max(0.0);
                let pen_coef = -2.0 * self.outage_weight * u / pair.allowance;
                let los_scale = k * k / ((1.0 + k) * (1.0 + k));
                let energy_scale = (2.0 * k + 1.0) / ((1.0 + k) * (1.0 + k));
                for (it, (i, h)) in pair.interferers.iter().zip(&states) {
                    for l in 0..len {
                        // ∂|I|²/∂v̄ = I conj(cascade)
                        let mut g = rate_coef * it.weight * i * it.cascade[l].conj();
                        if u > 0.0 {
                            let de = it.gain_cascade
                                * (los_scale * h * it.los[l].conj() + energy_scale * self.psi_sq[l] * v_t[l]);
                            g += 2.0 * pen_coef * it.weight * de;
                        }
                        g_t[l] += g;
                    }
                }
            }
        }
        (g_t, g_r)
    }
}

/// `‖ṽṽ^H − vv^H‖_F²`.
pub fn rank_one_gap(target: &[C64], v: &[C64]) -> f64 {
    let a: f64 = target.iter().map(|z| z.norm_sqr()).sum();
    let b: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let cross: C64 = target.iter().zip(v).map(|(t, x)| t.conj() * x).sum();
    (a * a - 2.0 * cross.norm_sqr() + b * b).max(0.0)
}

/// Iterate of the penalized ascent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub v_t: Vec<C64>,
    pub v_r: Vec<C64>,
    pub vt_tilde: Vec<C64>,
    pub vr_tilde: Vec<C64>,
    pub eta: f64,
    /// Penalized objective at `(v_t, v_r)`.
    pub objective: f64,
}

impl PhaseState {
    pub fn from_profile(profile: &RicsProfile) -> Self {
        let vt: Vec<C64> = profile
            .beta_t
            .iter()
            .zip(&profile.theta_t)
            .map(|(b, t)| C64::from_polar(b.sqrt(), *t))
            .collect();
        let vr: Vec<C64> = profile
            .beta_r
            .iter()
            .zip(&profile.theta_r)
            .map(|(b, t)| C64::from_polar(b.sqrt(), *t))
            .collect();
        Self {
            v_t: vt.clone(),
            v_r: vr.clone(),
            vt_tilde: vt,
            vr_tilde: vr,
            eta: 1.0,
            objective: f64::NEG_INFINITY,
        }
    }

    /// `ϑ = f(v) − (gap_t + gap_r)/(2η)`.
    pub fn penalized(&self, prob: &PhaseProblem, v_t: &[C64], v_r: &[C64]) -> f64 {
        prob.value(v_t, v_r)
            - (rank_one_gap(&self.vt_tilde, v_t) + rank_one_gap(&self.vr_tilde, v_r)) / (2.0 * self.eta)
    }

    /// Gradient of [`PhaseState::penalized`].
    pub fn penalized_gradient(&self, prob: &PhaseProblem, v_t: &[C64], v_r: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let (mut g_t, mut g_r) = prob.gradient(v_t, v_r);
        for (g, target, v) in [(&mut g_t, &self.vt_tilde, v_t), (&mut g_r, &self.vr_tilde, v_r)] {
            let cross: C64 = target.iter().zip(v).map(|(t, x)| t.conj() * x).sum();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            for ((gl, t), x) in g.iter_mut().zip(target).zip(v) {
                *gl += (2.0 / self.eta) * (t * cross - norm * x);
            }
        }
        (g_t, g_r)
    }
}

/// Gradient ascent on the penalized objective with backtracking, `steps` times.
pub fn update_beamformers(state: &mut PhaseState, prob: &PhaseProblem, refracts: bool, steps: usize) {
    let mut f = state.penalized(prob, &state.v_t, &state.v_r);
    let mut step = 1.0;
    for _ in 0..steps {
        let (g_t, g_r) = state.penalized_gradient(prob, &state.v_t, &state.v_r);
        let g_t = if refracts { g_t } else { vec![C64::new(0.0, 0.0); g_t.len()] };
        let norm: f64 = g_t.iter().chain(&g_r).map(|z| z.norm_sqr()).sum();
        if norm == 0.0 {
            break;
        }
        let mut accepted = false;
        let mut trial = step * 2.0;
        for _ in 0..60 {
            let cand_t: Vec<C64> = state.v_t.iter().zip(&g_t).map(|(v, g)| v + trial * g).collect();
            let cand_r: Vec<C64> = state.v_r.iter().zip(&g_r).map(|(v, g)| v + trial * g).collect();
            let fc = state.penalized(prob, &cand_t, &cand_r);
            if fc >= f + 1e-4 * trial * norm {
                let gain = fc - f;
                state.v_t = cand_t;
                state.v_r = cand_r;
                f = fc;
                step = trial;
                accepted = gain > 1e-12 * f.abs().max(1.0);
                break;
            }
            trial *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    state.objective = f;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOptions {
    pub max_rounds: usize,
    pub steps_per_round: usize,
    pub initial_eta: f64,
    /// Factor applied to `η` after each round.
    pub eta_decay: f64,
    pub residual_tol: f64,
}

impl Default for PhaseOptions {
    fn default() -> Self {
        Self {
            max_rounds: 100,
            steps_per_round: 25,
            initial_eta: 1e3,
            eta_decay: 0.8,
            residual_tol: 1e-6,
        }
    }
}

/// Outcome of [`solve_phases`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSolution {
    pub profile: RicsProfile,
    /// Unpenalized objective of the feasible profile after every round.
    pub trace: Vec<f64>,
    pub residual: f64,
    pub rounds: usize,
    /// Set when the round cap was hit before the residual tolerance.
    pub hit_cap: bool,
}

fn profile_from(elements: &[ElementChoice], psi: &[f64]) -> RicsProfile {
    let beta_t: Vec<f64> = elements.iter().map(|e| e.sqrt_beta_t * e.sqrt_beta_t).collect();
    RicsProfile {
        theta_t: elements.iter().map(|e| e.theta_t).collect(),
        theta_r: elements.iter().map(|e| e.theta_r).collect(),
        beta_r: beta_t.iter().map(|b| 1.0 - b).collect(),
        beta_t,
        psi: psi.to_vec(),
    }
}

fn profile_vectors(p: &RicsProfile) -> (Vec<C64>, Vec<C64>) {
    let st = PhaseState::from_profile(p);
    (st.vt_tilde, st.vr_tilde)
}

/// Optimizes phases and energy split with Ψ and the spectrum fixed.
pub fn solve_phases(sys: &System, alpha: &SpectrumAssignment, init: &RicsProfile, opts: PhaseOptions) -> PhaseSolution {
    let prob = PhaseProblem::new(sys, alpha, &init.psi);
    let refracts = sys.mode.refracts();
    if sys.mode == SurfaceMode::Off {
        let (vt, vr) = profile_vectors(init);
        return PhaseSolution {
            profile: init.clone(),
            trace: vec![prob.value(&vt, &vr)],
            residual: 0.0,
            rounds: 0,
            hit_cap: false,
        };
    }
    let mut start = init.clone();
    if !refracts {
        // Without a refracted path all energy goes to reflection.
        start.beta_r = vec![1.0; start.len()];
        start.beta_t = vec![0.0; start.len()];
    }
    let mut state = PhaseState::from_profile(&start);
    state.eta = opts.initial_eta;
    let mut best = start.clone();
    let mut best_value = prob.value(&state.vt_tilde, &state.vr_tilde);
    let mut trace = vec![best_value];
    let mut residual = f64::INFINITY;
    let mut rounds = 0;
    while rounds < opts.max_rounds {
        rounds += 1;
        update_beamformers(&mut state, &prob, refracts, opts.steps_per_round);
        let elements: Vec<ElementChoice> = (0..start.len())
            .map(|l| {
                if refracts {
                    coupled_element_update(state.v_t[l], state.v_r[l])
                } else {
                    let theta_r = normalize_angle(state.v_r[l].arg());
                    ElementChoice {
                        branch: Branch::Lag,
                        theta_t: normalize_angle(theta_r + FRAC_PI_2),
                        theta_r,
                        sqrt_beta_t: 0.0,
                        sqrt_beta_r: 1.0,
                        value: state.v_r[l].norm(),
                    }
                }
            })
            .collect();
        let profile = profile_from(&elements, &init.psi);
        let (vt, vr) = profile_vectors(&profile);
        state.vt_tilde = vt;
        state.vr_tilde = vr;
        let value = prob.value(&state.vt_tilde, &state.vr_tilde);
        if value > best_value {
            best_value = value;
            best = profile;
        }
        trace.push(value);
        residual = (rank_one_gap(&state.vt_tilde, &state.v_t) + rank_one_gap(&state.vr_tilde, &state.v_r)).sqrt();
        if residual <= opts.residual_tol {
            break;
        }
        state.eta *= opts.eta_decay;
    }
    if !refracts {
        best.beta_r = vec![1.0; best.len()];
        best.beta_t = vec![0.0; best.len()];
    }
    PhaseSolution {
        profile: best,
        trace,
        residual,
        rounds,
        hit_cap: residual > opts.residual_tol,
    }
}
