//! Road deployment: Poisson vehicle placement, CV selection and V2V pairing.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::config::{validate_config, ScenarioConfig};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub type Point = [f64; 3];

/// Placement retries before giving up on a sparse road.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 200;

pub fn distance(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Vehicle placements of one realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub cv_positions: Vec<Point>,
    pub v2v_tx_positions: Vec<Point>,
    pub v2v_rx_positions: Vec<Point>,
    /// Hz, one per CV.
    pub local_cpu: Vec<f64>,
    pub rng_seed: u64,
    /// Vehicles placed on the road, including the ones left idle.
    pub num_vehicles: usize,
}

impl Scenario {
    pub fn num_cvs(&self) -> usize {
        self.cv_positions.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.v2v_tx_positions.len()
    }
}

/// Places vehicles on the circular road and assigns their roles.
pub fn build_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    validate_config(cfg).map_err(Error::InvalidConfig)?;
    let mut rng = stream_rng(seed, Stream::Scenario);
    let needed = cfg.num_cvs + 2 * cfg.num_v2v_pairs;
    let road_length = 2.0 * std::f64::consts::PI * cfg.road_radius;
    let count_dist = Poisson::new(cfg.vehicle_density * road_length)
        .map_err(|e| Error::Domain(format!("vehicle intensity: {e}")))?;

    let mut vehicles = None;
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let count = count_dist.sample(&mut rng) as usize;
        if count < needed {
            continue;
        }
        let [cx, cy, _] = cfg.road_center;
        let placed: Vec<Point> = (0..count)
            .map(|_| {
                let phi = rng.random_range(0.0..std::f64::consts::TAU);
                [cx + cfg.road_radius * phi.cos(), cy + cfg.road_radius * phi.sin(), 0.0]
            })
            .collect();
        vehicles = Some(placed);
        break;
    }
    let vehicles = vehicles.ok_or(Error::PlacementFailure {
        attempts: MAX_PLACEMENT_ATTEMPTS,
        needed,
    })?;

    let mut cv_idx = index::sample(&mut rng, vehicles.len(), cfg.num_cvs).into_vec();
    cv_idx.sort_unstable();
    let mut is_cv = vec![false; vehicles.len()];
    for &i in &cv_idx {
        is_cv[i] = true;
    }
    let rest: Vec<Point> = vehicles
        .iter()
        .zip(&is_cv)
        .filter(|(_, &cv)| !cv)
        .map(|(p, _)| *p)
        .collect();
    let pairs = pair_v2v(&rest, cfg.num_v2v_pairs)?;

    let [fmin, fmax] = cfg.local_cpu_range;
    let local_cpu = (0..cfg.num_cvs)
        .map(|_| {
            if fmax > fmin {
                rng.random_range(fmin..=fmax)
            } else {
                fmin
            }
        })
        .collect();

    Ok(Scenario {
        cv_positions: cv_idx.iter().map(|&i| vehicles[i]).collect(),
        v2v_tx_positions: pairs.iter().map(|&(t, _)| rest[t]).collect(),
        v2v_rx_positions: pairs.iter().map(|&(_, r)| rest[r]).collect(),
        local_cpu,
        rng_seed: seed,
        num_vehicles: vehicles.len(),
    })
}

/// Greedy nearest-neighbor pairing.
///
/// Vehicles are visited in ascending index order; each unpaired one takes
/// its closest unpaired neighbor as receiver, ties going to the lower index.
/// Stops after `num_pairs` pairs.
pub fn pair_v2v(positions: &[Point], num_pairs: usize) -> Result<Vec<(usize, usize)>> {
    if positions.len() < 2 * num_pairs {
        return Err(Error::InsufficientVehicles {
            needed: 2 * num_pairs,
            available: positions.len(),
        });
    }
    let mut taken = vec![false; positions.len()];
    let mut pairs = Vec::with_capacity(num_pairs);
    for tx in 0..positions.len() {
        if pairs.len() == num_pairs {
            break;
        }
        if taken[tx] {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (rx, p) in positions.iter().enumerate() {
            if rx == tx || taken[rx] {
                continue;
            }
            let d = distance(&positions[tx], p);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((rx, d));
            }
        }
        let Some((rx, _)) = best else { break };
        taken[tx] = true;
        taken[rx] = true;
        pairs.push((tx, rx));
    }
    Ok(pairs)
}
