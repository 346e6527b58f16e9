//! Small-scale and large-scale channel synthesis for every link.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scenario::{distance, Point, Scenario};
use crate::units::db_to_linear;

pub type C64 = Complex64;

/// Element spacing of the surface array, in wavelengths.
pub const ELEMENT_SPACING: f64 = 0.5;

/// Amplitude path gain `sqrt(c0 · d^-exponent)` for `d ≥ 1` m.
pub fn path_loss(d: f64, c0: f64, exponent: f64) -> Result<f64> {
    if !(d >= 1.0) {
        return Err(Error::Domain(format!(
            "path loss distance {d} m is below the 1 m reference"
        )));
    }
    Ok((c0 * d.powf(-exponent)).sqrt())
}

/// Uniform linear array response, element `l` = `exp(j 2π spacing l sin(angle))`.
pub fn ula_steering(len: usize, angle: f64, spacing: f64) -> Vec<C64> {
    let step = TAU * spacing * angle.sin();
    (0..len).map(|l| C64::from_polar(1.0, step * l as f64)).collect()
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Mixes a LoS response with pre-drawn scattering terms.
pub fn rician_from(los: &[C64], nlos: &[C64], kappa: f64, pl: f64) -> Vec<C64> {
    let (w_los, w_nlos) = rician_weights(kappa);
    los.iter()
        .zip(nlos)
        .map(|(a, b)| pl * (w_los * a + w_nlos * b))
        .collect()
}

/// LoS and scattering amplitude weights for Rician factor `kappa`.
pub fn rician_weights(kappa: f64) -> (f64, f64) {
    if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    }
}

pub fn sample_rician<R: Rng + ?Sized>(los: &[C64], kappa: f64, pl: f64, rng: &mut R) -> Vec<C64> {
    let nlos: Vec<C64> = los.iter().map(|_| complex_normal(rng)).collect();
    rician_from(los, &nlos, kappa, pl)
}

/// `h_direct + Σ_l h_out[l]·diag[l]·h_in[l]`.
pub fn cascaded_gain(h_out: &[C64], diag: &[C64], h_in: &[C64], h_direct: C64) -> Result<C64> {
    let n = diag.len();
    for len in [h_out.len(), h_in.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, found: len });
        }
    }
    Ok(h_direct
        + h_out
            .iter()
            .zip(diag)
            .zip(h_in)
            .map(|((o, d), i)| o * d * i)
            .sum::<C64>())
}

/// Large-scale gains and LoS responses kept alongside the realizations.
/// The closed-form interference expectation needs them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkStats {
    pub kappa: f64,
    pub los_mr: Vec<Vec<C64>>,
    pub los_rn: Vec<Vec<C64>>,
    /// Power gains (squared amplitude path loss) per link.
    pub gain_mr: Vec<f64>,
    pub gain_rn: Vec<f64>,
    pub gain_rb: f64,
    pub gain_n: Vec<f64>,
    pub gain_mn: Vec<Vec<f64>>,
    pub gain_mb: Vec<f64>,
    pub gain_nb: Vec<f64>,
}

/// One channel realization of the whole network.
///
/// Surface vectors are indexed by element. `h_rn` is stored without
/// conjugation; the refraction cascade uses `conj(h_rn)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    pub h_mb: Vec<C64>,
    pub h_rb: Vec<C64>,
    pub h_mr: Vec<Vec<C64>>,
    pub h_rn: Vec<Vec<C64>>,
    pub h_n: Vec<C64>,
    /// `[cv][pair]`.
    pub h_mn: Vec<Vec<C64>>,
    pub h_nb: Vec<C64>,
    pub stats: LinkStats,
}

impl ChannelSet {
    pub fn num_cvs(&self) -> usize {
        self.h_mb.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.h_n.len()
    }

    pub fn num_elements(&self) -> usize {
        self.h_rb.len()
    }

    /// Per-element CV to BS cascade `h_RB ∘ h_mR`.
    pub fn bs_cascade(&self, m: usize) -> Vec<C64> {
        hadamard(&self.h_rb, &self.h_mr[m])
    }

    /// Per-element CV to receiver cascade `conj(h_Rn) ∘ h_mR`.
    pub fn v2v_cascade(&self, m: usize, n: usize) -> Vec<C64> {
        self.h_rn[n]
            .iter()
            .zip(&self.h_mr[m])
            .map(|(a, b)| a.conj() * b)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn hadamard(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn azimuth(from: &Point, to: &Point) -> f64 {
    (to[1] - from[1]).atan2(to[0] - from[0])
}

/// Realizes every channel of `sc`.
///
/// The scattering terms are drawn in an order that depends only on the
/// link counts, so moving the surface or the BS keeps them unchanged.
pub fn assemble_channels(sc: &Scenario, cfg: &ScenarioConfig, seed: u64) -> Result<ChannelSet> {
    let m_count = sc.num_cvs();
    let n_count = sc.num_pairs();
    let len = cfg.num_elements;
    let mut rng = stream_rng(seed, Stream::Channel);
    let mut draw = |k: usize| -> Vec<C64> { (0..k).map(|_| complex_normal(&mut rng)).collect() };

    let nlos_mb = draw(m_count);
    let nlos_rb = draw(len);
    let nlos_mr: Vec<_> = (0..m_count).map(|_| draw(len)).collect();
    let nlos_rn: Vec<_> = (0..n_count).map(|_| draw(len)).collect();
    let nlos_n = draw(n_count);
    let nlos_mn: Vec<_> = (0..m_count).map(|_| draw(n_count)).collect();
    let nlos_nb = draw(n_count);

    let c0 = cfg.pathloss_ref_linear();
    let exp = cfg.pathloss_exponent;
    let hop_gain = db_to_linear(cfg.element_gain);
    // Vehicles are never closer than the 1 m reference distance.
    let gain = |a: &Point, b: &Point| -> Result<f64> {
        Ok(path_loss(distance(a, b).max(1.0), c0, exp)?.powi(2))
    };
    let bs = cfg.bs_position;
    let ris = cfg.rics_position;
    let kappa = cfg.rician_factor;

    let gain_mb = sc.cv_positions.iter().map(|p| gain(p, &bs)).collect::<Result<Vec<_>>>()?;
    let gain_nb = sc.v2v_tx_positions.iter().map(|p| gain(p, &bs)).collect::<Result<Vec<_>>>()?;
    let gain_n = sc
        .v2v_tx_positions
        .iter()
        .zip(&sc.v2v_rx_positions)
        .map(|(t, r)| gain(t, r))
        .collect::<Result<Vec<_>>>()?;
    let gain_mn = sc
        .cv_positions
        .iter()
        .map(|c| sc.v2v_rx_positions.iter().map(|r| gain(c, r)).collect())
        .collect::<Result<Vec<Vec<_>>>>()?;
    let gain_rb = gain(&ris, &bs)? * hop_gain;
    let gain_mr = sc
        .cv_positions
        .iter()
        .map(|p| Ok(gain(p, &ris)? * hop_gain))
        .collect::<Result<Vec<_>>>()?;
    let gain_rn = sc
        .v2v_rx_positions
        .iter()
        .map(|p| Ok(gain(p, &ris)? * hop_gain))
        .collect::<Result<Vec<_>>>()?;

    let los_rb = ula_steering(len, azimuth(&ris, &bs), ELEMENT_SPACING);
    let los_mr: Vec<_> = sc
        .cv_positions
        .iter()
        .map(|p| ula_steering(len, azimuth(&ris, p), ELEMENT_SPACING))
        .collect();
    let los_rn: Vec<_> = sc
        .v2v_rx_positions
        .iter()
        .map(|p| ula_steering(len, azimuth(&ris, p), ELEMENT_SPACING))
        .collect();

    let scale = |g: f64, z: &C64| g.sqrt() * z;
    Ok(ChannelSet {
        h_mb: gain_mb.iter().zip(&nlos_mb).map(|(g, z)| scale(*g, z)).collect(),
        h_rb: rician_from(&los_rb, &nlos_rb, kappa, gain_rb.sqrt()),
        h_mr: (0..m_count)
            .map(|m| rician_from(&los_mr[m], &nlos_mr[m], kappa, gain_mr[m].sqrt()))
            .collect(),
        h_rn: (0..n_count)
            .map(|n| rician_from(&los_rn[n], &nlos_rn[n], kappa, gain_rn[n].sqrt()))
            .collect(),
        h_n: gain_n.iter().zip(&nlos_n).map(|(g, z)| scale(*g, z)).collect(),
        h_mn: (0..m_count)
            .map(|m| {
                gain_mn[m]
                    .iter()
                    .zip(&nlos_mn[m])
                    .map(|(g, z)| scale(*g, z))
                    .collect()
            })
            .collect(),
        h_nb: gain_nb.iter().zip(&nlos_nb).map(|(g, z)| scale(*g, z)).collect(),
        stats: LinkStats {
            kappa,
            los_mr,
            los_rn,
            gain_mr,
            gain_rn,
            gain_rb,
            gain_n,
            gain_mn,
            gain_mb,
            gain_nb,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::build_scenario;

    #[test]
    fn path_loss_reference_points() {
        let c0 = db_to_linear(-30.0);
        assert!((path_loss(1.0, c0, 2.5).unwrap() - 0.031_622_776_6).abs() < 1e-9);
        assert!((path_loss(100.0, 1e-3, 2.5).unwrap() - 1e-4).abs() < 1e-15);
        assert!(path_loss(0.5, c0, 2.5).is_err());
    }

    #[test]
    fn steering_examples() {
        assert!(ula_steering(5, 0.0, 0.5).iter().all(|z| (z - 1.0).norm() < 1e-15));
        let v = ula_steering(2, std::f64::consts::FRAC_PI_2, 0.5);
        assert!((v[0] - 1.0).norm() < 1e-15);
        assert!((v[1] + 1.0).norm() < 1e-12);
    }

    #[test]
    fn infinite_kappa_is_pure_los() {
        let los = ula_steering(4, 0.3, 0.5);
        let mut rng = stream_rng(1, Stream::Oracle);
        let h = sample_rician(&los, f64::INFINITY, 0.2, &mut rng);
        for (a, b) in h.iter().zip(&los) {
            assert!((a - 0.2 * b).norm() < 1e-15);
        }
    }

    #[test]
    fn cascade_basics() {
        let one = [C64::new(1.0, 0.0)];
        assert_eq!(cascaded_gain(&one, &one, &one, C64::new(0.0, 0.0)).unwrap(), C64::new(1.0, 0.0));
        let zeros = [C64::new(0.0, 0.0); 3];
        let h = [C64::new(0.3, -1.0); 3];
        let d = C64::new(0.7, 0.1);
        assert_eq!(cascaded_gain(&h, &zeros, &h, d).unwrap(), d);
        assert!(matches!(
            cascaded_gain(&h, &zeros[..2], &h, d),
            Err(Error::LengthMismatch { expected: 2, found: 3 })
        ));
    }

    #[test]
    fn assembled_shapes_and_determinism() {
        let cfg = ScenarioConfig::reference();
        let sc = build_scenario(&cfg, 3).unwrap();
        let a = assemble_channels(&sc, &cfg, 3).unwrap();
        let b = assemble_channels(&sc, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.h_rb.len(), 30);
        assert!(a.h_mr.iter().chain(&a.h_rn).all(|v| v.len() == 30));
        assert_eq!(a.h_mn.len(), 10);
        assert!(a.h_mn.iter().all(|row| row.len() == 10));
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        assert!(a.h_mr.iter().flatten().all(finite));
    }

    #[test]
    fn json_dump_roundtrip() {
        let cfg = ScenarioConfig {
            num_cvs: 2,
            num_v2v_pairs: 2,
            num_elements: 3,
            ..ScenarioConfig::reference()
        };
        let sc = build_scenario(&cfg, 1).unwrap();
        let ch = assemble_channels(&sc, &cfg, 1).unwrap();
        let text = ch.to_json().unwrap();
        let back = ChannelSet::from_json(&text).unwrap();
        assert_eq!(back, ch);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(value["h_mb"][0].as_array().is_some_and(|pair| pair.len() == 2));
    }
}
