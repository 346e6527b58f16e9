//! Amplitude-adjustment factors by projected gradient descent on the
//! residual V2V interference.

use serde::{Deserialize, Serialize};

use crate::channel::C64;
use crate::metrics::{RicsProfile, SpectrumAssignment};
use crate::model::System;

/// One interference residual `h_mn + Σ_i Ψ_i d_i` and its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsTerm {
    pub weight: f64,
    pub direct: C64,
    /// `sqrt(β_t,i) e^{jθ_t,i} conj(h_Rn,i) h_mR,i`.
    pub coeffs: Vec<C64>,
}

/// Weighted least-squares interference objective in Ψ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsProblem {
    pub terms: Vec<LsTerm>,
}

impl LsProblem {
    /// One term per sharing (CV, pair), weighted by `α_mn P_m / noise` so the
    /// objective reads as interference-to-noise ratio.
    pub fn new(sys: &System, alpha: &SpectrumAssignment, profile: &RicsProfile) -> Self {
        let ch = sys.channels;
        let b = &sys.budget;
        let mut terms = Vec::new();
        if !sys.mode.refracts() {
            return Self { terms };
        }
        for m in 0..sys.num_cvs() {
            for n in 0..sys.num_pairs() {
                let a = alpha.alpha[m][n];
                if a <= 0.0 {
                    continue;
                }
                let coeffs = (0..profile.len())
                    .map(|i| {
                        C64::from_polar(profile.beta_t[i].sqrt(), profile.theta_t[i])
                            * ch.h_rn[n][i].conj()
                            * ch.h_mr[m][i]
                    })
                    .collect();
                terms.push(LsTerm {
                    weight: a * b.cv_power / b.noise,
                    direct: ch.h_mn[m][n],
                    coeffs,
                });
            }
        }
        Self { terms }
    }

    fn residual(term: &LsTerm, psi: &[f64]) -> C64 {
        term.direct + term.coeffs.iter().zip(psi).map(|(d, p)| d * *p).sum::<C64>()
    }

    pub fn ls_objective(&self, psi: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.weight * Self::residual(t, psi).norm_sqr())
            .sum()
    }

    /// The same objective written as separate real and imaginary residuals.
    pub fn ls_objective_split(&self, psi: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let re = t.direct.re + t.coeffs.iter().zip(psi).map(|(d, p)| p * d.re).sum::<f64>();
                let im = t.direct.im + t.coeffs.iter().zip(psi).map(|(d, p)| p * d.im).sum::<f64>();
                t.weight * (re * re + im * im)
            })
            .sum()
    }

    pub fn ls_gradient(&self, psi: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; psi.len()];
        for t in &self.terms {
            let r = Self::residual(t, psi);
            for (gi, d) in g.iter_mut().zip(&t.coeffs) {
                *gi += 2.0 * t.weight * (r.conj() * d).re;
            }
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GdOptions {
    /// Stop once the projected gradient norm falls below this.
    pub tol: f64,
    /// First trial step of every line search.
    pub rate: f64,
    pub max_iter: usize,
    pub armijo: f64,
}

impl Default for GdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            rate: 0.01,
            max_iter: 10_000,
            armijo: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSolution {
    pub psi: Vec<f64>,
    /// Objective before the first step and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub hit_cap: bool,
}

fn clamp_all(x: &mut [f64], [lo, hi]: [f64; 2]) {
    for v in x {
        *v = v.clamp(lo, hi);
    }
}

/// Norm of `Ψ − P(Ψ − ∇f)`, zero exactly at a box-constrained stationary point.
pub fn projected_gradient_norm(psi: &[f64], grad: &[f64], bounds: [f64; 2]) -> f64 {
    psi.iter()
        .zip(grad)
        .map(|(p, g)| {
            let d = p - (p - g).clamp(bounds[0], bounds[1]);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Starts from Ψ = 1 (clipped into `bounds`) and descends with Armijo backtracking.
pub fn solve_amplitude_gd(prob: &LsProblem, len: usize, bounds: [f64; 2], opts: GdOptions) -> AmplitudeSolution {
    let mut psi = vec![1.0; len];
    clamp_all(&mut psi, bounds);
    let mut f = prob.ls_objective(&psi);
    let mut trace = vec![f];
    let mut iterations = 0;
    let mut hit_cap = true;
    while iterations < opts.max_iter {
        let g = prob.ls_gradient(&psi);
        if projected_gradient_norm(&psi, &g, bounds) < opts.tol {
            hit_cap = false;
            break;
        }
        iterations += 1;
        let mut step = opts.rate;
        let mut moved = false;
        for _ in 0..200 {
            let mut cand: Vec<f64> = psi.iter().zip(&g).map(|(p, gi)| p - step * gi).collect();
            clamp_all(&mut cand, bounds);
            let decrease: f64 = g.iter().zip(&psi).zip(&cand).map(|((gi, p), c)| gi * (p - c)).sum();
            if decrease <= 0.0 {
                break;
            }
            let fc = prob.ls_objective(&cand);
            if fc <= f - opts.armijo * decrease {
                moved = fc < f;
                psi = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            // No representable descent left.
            hit_cap = false;
            break;
        }
        trace.push(f);
    }
    AmplitudeSolution {
        psi,
        trace,
        iterations,
        hit_cap,
    }
}
