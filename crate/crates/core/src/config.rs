//! Simulation parameters and their validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{db_to_linear, dbm_to_watts};

/// Every tunable of one simulated deployment.
///
/// Field names double as the JSON keys of a config file. Keys not listed
/// here are rejected. The fields after `vehicle_density` are model
/// extensions with defaults and may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_cvs: usize,
    pub num_v2v_pairs: usize,
    pub num_elements: usize,
    /// Radius of the simulated field around the origin, meters.
    pub field_radius: f64,
    pub bs_position: [f64; 3],
    pub rics_position: [f64; 3],
    /// dBm.
    pub cv_power: f64,
    /// dBm.
    pub v2v_power: f64,
    /// Hz.
    pub bandwidth: f64,
    /// Total noise power over the band, dBm.
    pub noise_floor: f64,
    /// Path loss at 1 m, dB.
    pub pathloss_ref: f64,
    pub pathloss_exponent: f64,
    pub rician_factor: f64,
    pub task_bits: f64,
    pub cycles_per_bit: f64,
    /// `[min, max]` local CPU frequency, Hz.
    pub local_cpu_range: [f64; 2],
    /// Edge server CPU frequency, Hz.
    pub edge_cpu: f64,
    /// Ratio of the on-board model accuracy to the edge model accuracy.
    pub accuracy_ratio: f64,
    pub edge_accuracy: f64,
    /// Linear SINR threshold of the V2V links.
    pub sinr_threshold: f64,
    pub outage_cap: f64,
    pub smooth_param: f64,
    pub aioa_tol: f64,
    pub gd_tol: f64,
    pub gd_rate: f64,
    /// Poisson intensity of vehicles along the road, vehicles per meter.
    pub vehicle_density: f64,

    /// Deadline carried with each task. Reported, never enforced.
    #[serde(default)]
    pub max_tolerable_delay: Option<f64>,
    /// Center of the circular road, meters. Height is ignored.
    #[serde(default = "defaults::road_center")]
    pub road_center: [f64; 3],
    /// Radius of the circular road, meters.
    #[serde(default = "defaults::road_radius")]
    pub road_radius: f64,
    /// Power gain of one surface hop on top of its distance path loss, dB.
    #[serde(default = "defaults::element_gain")]
    pub element_gain: f64,
    /// Weight of V2V spectral efficiency (bit/s/Hz) in the joint objective, 1/s.
    #[serde(default = "defaults::v2v_weight")]
    pub v2v_weight: f64,
    /// Weight of V2V spectral efficiency relative to V2I spectral efficiency
    /// inside the beamforming objective.
    #[serde(default = "defaults::phase_v2v_weight")]
    pub phase_v2v_weight: f64,
    /// Box used when tuning the amplitude factors.
    #[serde(default = "defaults::psi_bounds")]
    pub psi_bounds: [f64; 2],
    /// Cap on the outer alternating loop.
    #[serde(default = "defaults::max_outer_iters")]
    pub max_outer_iters: usize,
}

mod defaults {
    pub fn road_center() -> [f64; 3] {
        [200.0, 0.0, 0.0]
    }
    pub fn road_radius() -> f64 {
        60.0
    }
    pub fn element_gain() -> f64 {
        27.0
    }
    pub fn v2v_weight() -> f64 {
        0.04
    }
    pub fn phase_v2v_weight() -> f64 {
        1.0
    }
    pub fn psi_bounds() -> [f64; 2] {
        [0.5, 2.0]
    }
    pub fn max_outer_iters() -> usize {
        30
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl ScenarioConfig {
    /// The reference parameter set.
    pub fn reference() -> Self {
        Self {
            num_cvs: 10,
            num_v2v_pairs: 10,
            num_elements: 30,
            field_radius: 500.0,
            bs_position: [0.0, 0.0, 30.0],
            rics_position: [80.0, 0.0, 30.0],
            cv_power: 28.0,
            v2v_power: 23.0,
            bandwidth: 1.0e6,
            noise_floor: -110.0,
            pathloss_ref: -30.0,
            pathloss_exponent: 2.5,
            rician_factor: 4.0,
            task_bits: 15.0e6,
            cycles_per_bit: 100.0,
            local_cpu_range: [1.0e9, 5.0e9],
            edge_cpu: 10.0e9,
            accuracy_ratio: 0.8,
            edge_accuracy: 0.9,
            sinr_threshold: 2.0,
            outage_cap: 0.01,
            smooth_param: 1.0,
            aioa_tol: 1.0e-3,
            gd_tol: 1.0e-6,
            gd_rate: 0.01,
            vehicle_density: 0.3,
            max_tolerable_delay: None,
            road_center: defaults::road_center(),
            road_radius: defaults::road_radius(),
            element_gain: defaults::element_gain(),
            v2v_weight: defaults::v2v_weight(),
            phase_v2v_weight: defaults::phase_v2v_weight(),
            psi_bounds: defaults::psi_bounds(),
            max_outer_iters: defaults::max_outer_iters(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    /// Returns `self` if valid, otherwise every violation at once.
    pub fn validated(self) -> Result<Self> {
        validate_config(&self).map_err(Error::InvalidConfig)?;
        Ok(self)
    }

    /// Cycles needed to process one task.
    pub fn task_cycles(&self) -> f64 {
        self.cycles_per_bit * self.task_bits
    }

    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            cv_power: dbm_to_watts(self.cv_power),
            v2v_power: dbm_to_watts(self.v2v_power),
            noise: dbm_to_watts(self.noise_floor),
            bandwidth: self.bandwidth,
        }
    }

    pub fn pathloss_ref_linear(&self) -> f64 {
        db_to_linear(self.pathloss_ref)
    }

    /// Horizontal BS to surface distance.
    pub fn rics_distance(&self) -> f64 {
        let dx = self.rics_position[0] - self.bs_position[0];
        let dy = self.rics_position[1] - self.bs_position[1];
        dx.hypot(dy)
    }
}

/// Powers and noise in linear SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// W.
    pub cv_power: f64,
    /// W.
    pub v2v_power: f64,
    /// W.
    pub noise: f64,
    /// Hz.
    pub bandwidth: f64,
}

/// Checks every invariant of `cfg` and reports all violations.
pub fn validate_config(cfg: &ScenarioConfig) -> std::result::Result<(), Vec<String>> {
    let mut errs = Vec::new();
    let mut need = |ok: bool, msg: &str| {
        if !ok {
            errs.push(msg.to_string());
        }
    };
    need(cfg.num_cvs >= 1, "num_cvs ≥ 1");
    need(cfg.num_v2v_pairs >= 1, "num_v2v_pairs ≥ 1");
    need(cfg.num_elements >= 1, "num_elements ≥ 1");
    need(
        cfg.field_radius.is_finite() && cfg.field_radius > 0.0,
        "field_radius > 0",
    );
    need(
        cfg.bs_position.iter().chain(&cfg.rics_position).all(|x| x.is_finite()),
        "bs_position and rics_position finite",
    );
    need(cfg.cv_power.is_finite(), "cv_power finite");
    need(cfg.v2v_power.is_finite(), "v2v_power finite");
    need(cfg.noise_floor.is_finite(), "noise_floor finite");
    need(cfg.pathloss_ref.is_finite(), "pathloss_ref finite");
    need(
        cfg.bandwidth.is_finite() && cfg.bandwidth > 0.0,
        "bandwidth > 0",
    );
    need(
        cfg.pathloss_exponent.is_finite() && cfg.pathloss_exponent > 0.0,
        "pathloss_exponent > 0",
    );
    need(cfg.rician_factor >= 0.0, "rician_factor ≥ 0");
    need(
        cfg.task_bits.is_finite() && cfg.task_bits > 0.0,
        "task_bits > 0",
    );
    need(
        cfg.cycles_per_bit.is_finite() && cfg.cycles_per_bit > 0.0,
        "cycles_per_bit > 0",
    );
    let [fmin, fmax] = cfg.local_cpu_range;
    need(fmin.is_finite() && fmin > 0.0, "local_cpu_range min > 0");
    need(fmin <= fmax && fmax.is_finite(), "local_cpu_range min ≤ max");
    need(cfg.edge_cpu.is_finite() && cfg.edge_cpu > 0.0, "edge_cpu > 0");
    need(
        (0.0..=1.0).contains(&cfg.accuracy_ratio),
        "accuracy_ratio in [0,1]",
    );
    need(
        (0.0..=1.0).contains(&cfg.edge_accuracy),
        "edge_accuracy in [0,1]",
    );
    need(
        cfg.sinr_threshold.is_finite() && cfg.sinr_threshold >= 0.0,
        "sinr_threshold ≥ 0",
    );
    need(
        cfg.outage_cap > 0.0 && cfg.outage_cap < 0.5,
        "outage_cap in (0,0.5)",
    );
    need(cfg.smooth_param > 0.0, "smooth_param > 0");
    need(cfg.aioa_tol >= 0.0, "aioa_tol ≥ 0");
    need(cfg.gd_tol > 0.0, "gd_tol > 0");
    need(cfg.gd_rate.is_finite() && cfg.gd_rate > 0.0, "gd_rate > 0");
    need(
        cfg.vehicle_density.is_finite() && cfg.vehicle_density > 0.0,
        "vehicle_density > 0",
    );
    if let Some(d) = cfg.max_tolerable_delay {
        need(d > 0.0, "max_tolerable_delay > 0");
    }
    need(
        cfg.road_radius.is_finite() && cfg.road_radius > 0.0,
        "road_radius > 0",
    );
    let reach = cfg.road_center[0].hypot(cfg.road_center[1]) + cfg.road_radius;
    need(reach <= cfg.field_radius + 1e-9, "road inside field_radius");
    need(cfg.element_gain.is_finite(), "element_gain finite");
    need(cfg.v2v_weight >= 0.0, "v2v_weight ≥ 0");
    need(cfg.phase_v2v_weight >= 0.0, "phase_v2v_weight ≥ 0");
    let [plo, phi] = cfg.psi_bounds;
    need(plo > 0.0 && plo <= phi, "psi_bounds 0 < min ≤ max");
    need(cfg.max_outer_iters >= 1, "max_outer_iters ≥ 1");
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_set_is_valid() {
        assert_eq!(validate_config(&ScenarioConfig::reference()), Ok(()));
    }

    #[test]
    fn zero_cvs_rejected() {
        let cfg = ScenarioConfig {
            num_cvs: 0,
            ..ScenarioConfig::reference()
        };
        let errs = validate_config(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e == "num_cvs ≥ 1"));
    }

    #[test]
    fn zero_outage_rejected() {
        let cfg = ScenarioConfig {
            outage_cap: 0.0,
            ..ScenarioConfig::reference()
        };
        let errs = validate_config(&cfg).unwrap_err();
        assert!(errs.iter().any(|e| e == "outage_cap in (0,0.5)"));
    }

    #[test]
    fn reports_all_violations() {
        let cfg = ScenarioConfig {
            num_cvs: 0,
            num_elements: 0,
            accuracy_ratio: 1.5,
            local_cpu_range: [5e9, 1e9],
            ..ScenarioConfig::reference()
        };
        assert_eq!(validate_config(&cfg).unwrap_err().len(), 4);
    }

    #[test]
    fn json_roundtrip_and_unknown_keys() {
        let cfg = ScenarioConfig::reference();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json_str(&text).unwrap(), cfg);

        let mut value: serde_json::Value = serde_json::from_str(&text).unwrap();
        value["bogus"] = serde_json::json!(1);
        assert!(ScenarioConfig::from_json_str(&value.to_string()).is_err());
    }

    #[test]
    fn extensions_are_optional() {
        let mut value = serde_json::to_value(ScenarioConfig::reference()).unwrap();
        let obj = value.as_object_mut().unwrap();
        for key in ["road_center", "road_radius", "element_gain", "psi_bounds"] {
            obj.remove(key);
        }
        let cfg = ScenarioConfig::from_json_str(&value.to_string()).unwrap();
        assert_eq!(cfg, ScenarioConfig::reference());
    }
}
