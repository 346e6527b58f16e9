//! Material calculator for the GRIN-MS-GRIN amplitude-adjustment stack.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::channel::C64;
use crate::error::{Error, Result};

/// Vacuum permittivity, F/m.
pub const VACUUM_PERMITTIVITY: f64 = 8.85e-12;
/// Vacuum permeability, H/m.
pub const VACUUM_PERMEABILITY: f64 = 4.0 * PI * 1e-7;
/// Lengths are expressed in this unit before entering a logarithm.
pub const LENGTH_UNIT: f64 = 1e-6;

/// Geometry and material of the stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrinDesign {
    /// Free-space operating wavelength, m.
    pub wavelength: f64,
    /// Metasurface thickness, m.
    pub delta: f64,
    /// GRIN lens aperture width, m.
    pub grin_width: f64,
    /// GRIN lens length, m.
    pub grin_length: f64,
    /// Permittivity on the lens axis, F/m.
    pub eps_center: f64,
    /// Largest usable |Im(ε/ε0)|.
    pub loss_cap: f64,
}

impl Default for GrinDesign {
    fn default() -> Self {
        let wavelength = 3e-6;
        Self {
            wavelength,
            delta: wavelength / 3.0,
            grin_width: 10.0 * wavelength,
            grin_length: 35e-6,
            eps_center: 2.01 * VACUUM_PERMITTIVITY,
            loss_cap: 100.0,
        }
    }
}

impl GrinDesign {
    /// Free-space wavenumber, rad/m.
    pub fn k0(&self) -> f64 {
        TAU / self.wavelength
    }

    /// Aperture width in [`LENGTH_UNIT`]s.
    pub fn width_normalized(&self) -> f64 {
        self.grin_width / LENGTH_UNIT
    }
}

/// Metasurface layer realizing one amplitude factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialSpec {
    /// Relative permittivity; equals the relative permeability (matched impedance).
    pub eps_ratio: C64,
    pub delta: f64,
    pub k0: f64,
    pub grin_width: f64,
    pub grin_length: f64,
    pub eps_center: f64,
    pub feasible: bool,
}

impl MaterialSpec {
    pub fn mu_ratio(&self) -> C64 {
        self.eps_ratio
    }
}

/// Parabolic lens profile `ε_c (1 − (π y / 2L_g)²)`.
pub fn grin_permittivity(y: f64, eps_center: f64, grin_length: f64, grin_width: f64) -> Result<f64> {
    let half_width = grin_width / 2.0;
    if y.abs() > half_width {
        return Err(Error::OutOfAperture { y, half_width });
    }
    let k = PI / (2.0 * grin_length);
    Ok(eps_center * (1.0 - k * k * y * y))
}

/// Transfer-function gain `2/(Ψ W)` with `W` in normalized units.
pub fn transfer_gain(psi: f64, width: f64) -> Result<f64> {
    if !(psi > 0.0) {
        return Err(Error::NonPositivePsi(psi));
    }
    Ok(2.0 / (psi * width))
}

/// Relative permittivity `j (ln(Ψ W) − ln 2)/(k0 Δ)`, `W` normalized.
pub fn eps_ratio(psi: f64, delta: f64, k0: f64, width: f64) -> Result<C64> {
    if !(psi > 0.0) {
        return Err(Error::NonPositivePsi(psi));
    }
    let phase = (psi * width / 2.0).ln();
    Ok(C64::new(0.0, phase / (k0 * delta)))
}

pub fn ms_material(psi: f64, design: &GrinDesign) -> Result<MaterialSpec> {
    let k0 = design.k0();
    let ratio = eps_ratio(psi, design.delta, k0, design.width_normalized())?;
    Ok(MaterialSpec {
        eps_ratio: ratio,
        delta: design.delta,
        k0,
        grin_width: design.grin_width,
        grin_length: design.grin_length,
        eps_center: design.eps_center,
        feasible: ratio.im.abs() <= design.loss_cap,
    })
}

/// Amplitude factors reachable without exceeding `loss_cap`; `width` normalized.
pub fn feasible_psi_range(delta: f64, k0: f64, width: f64, loss_cap: f64) -> [f64; 2] {
    let center = 2.0 / width;
    let spread = k0 * delta * loss_cap;
    [center * (-spread).exp(), center * spread.exp()]
}

pub fn design_psi_range(design: &GrinDesign) -> [f64; 2] {
    feasible_psi_range(design.delta, design.k0(), design.width_normalized(), design.loss_cap)
}
