//! Simulator for vehicular edge offloading assisted by a reconfigurable
//! intelligent computational surface (RICS).
//!
//! A run builds a road scenario, draws Rician channels and then alternates
//! four block solvers (offloading ratios, spectrum sharing, surface phases
//! and analog amplitude factors) to maximize the sum safety coefficient of
//! the offloading vehicles under a V2V outage constraint.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aioa;
pub mod channel;
pub mod config;
pub mod error;
pub mod harness;
pub mod metasurface;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod scenario;
pub mod solver_amplitude;
pub mod solver_offload;
pub mod solver_phase;
pub mod solver_spectrum;
pub mod units;
pub mod validation;

pub use aioa::{run_aioa, AioaOptions, Policy, SolverTrace};
pub use channel::{assemble_channels, ChannelSet, C64};
pub use config::{validate_config, ScenarioConfig};
pub use error::{Error, Result};
pub use harness::{run_scheme, sweep, ResultRow, Scheme, SweepParam};
pub use metrics::{OffloadPlan, RicsProfile, SpectrumAssignment, SurfaceMode};
pub use model::System;
pub use scenario::{build_scenario, Scenario};
pub use validation::{validate, Suite, ValidationReport};
