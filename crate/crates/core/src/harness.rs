//! Benchmark schemes, parameter sweeps, validation suites and CSV export.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::IndexedRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aioa::{run_aioa, AioaOptions, OffloadPolicy, PhasePolicy, Policy, PsiPolicy, SolverTrace, SpectrumPolicy};
use crate::channel::{assemble_channels, ChannelSet};
use crate::config::{validate_config, ScenarioConfig};
use crate::error::{Error, Result};
use crate::metasurface::{ms_material, GrinDesign};
use crate::metrics::{SpectrumAssignment, SurfaceMode};
use crate::model::System;
use crate::rng::{stream_rng, Stream};
use crate::scenario::{build_scenario, Scenario};

/// Named solution strategies compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    Aioa,
    RandOffload,
    RandPhase,
    RandSpectrum,
    FixedPsi,
    RandPsi,
    StarRis,
    RisOnly,
    NoRis,
    TotalOffload,
    TotalLocal,
    RandBinaryOffload,
}

impl Scheme {
    pub const ALL: [Scheme; 12] = [
        Scheme::Aioa,
        Scheme::RandOffload,
        Scheme::RandPhase,
        Scheme::RandSpectrum,
        Scheme::FixedPsi,
        Scheme::RandPsi,
        Scheme::StarRis,
        Scheme::RisOnly,
        Scheme::NoRis,
        Scheme::TotalOffload,
        Scheme::TotalLocal,
        Scheme::RandBinaryOffload,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Scheme::Aioa => "aioa",
            Scheme::RandOffload => "rand_offload",
            Scheme::RandPhase => "rand_phase",
            Scheme::RandSpectrum => "rand_spectrum",
            Scheme::FixedPsi => "fixed_psi",
            Scheme::RandPsi => "rand_psi",
            Scheme::StarRis => "star_ris",
            Scheme::RisOnly => "ris_only",
            Scheme::NoRis => "no_ris",
            Scheme::TotalOffload => "total_offload",
            Scheme::TotalLocal => "total_local",
            Scheme::RandBinaryOffload => "rand_binary_offload",
        }
    }

    pub fn mode(self) -> SurfaceMode {
        match self {
            Scheme::RisOnly => SurfaceMode::ReflectOnly,
            Scheme::NoRis => SurfaceMode::Off,
            _ => SurfaceMode::Rics,
        }
    }

    /// Block handling of this scheme; random choices come from `rng`.
    pub fn policy<R: Rng + ?Sized>(self, m: usize, n: usize, rng: &mut R) -> Policy {
        let mut p = Policy::full();
        match self {
            Scheme::Aioa | Scheme::RisOnly | Scheme::NoRis => {}
            Scheme::RandOffload => {
                p.offload = OffloadPolicy::Fixed((0..m).map(|_| rng.random_range(0.0..=1.0)).collect())
            }
            Scheme::RandPhase => p.phase = PhasePolicy::Fixed,
            Scheme::RandSpectrum => {
                let mut alpha = SpectrumAssignment::unshared(m, n);
                let pairs: Vec<usize> = (0..n).collect();
                for row in alpha.alpha.iter_mut() {
                    if let Some(&k) = pairs.choose(rng) {
                        row[k] = 1.0;
                    }
                }
                p.spectrum = SpectrumPolicy::Fixed(alpha);
            }
            Scheme::FixedPsi => p.psi = PsiPolicy::Constant(1.2),
            Scheme::RandPsi => p.psi = PsiPolicy::Redraw { lo: 1.0, hi: 2.0 },
            Scheme::StarRis => p.psi = PsiPolicy::Constant(1.0),
            Scheme::TotalOffload => p.offload = OffloadPolicy::Fixed(vec![1.0; m]),
            Scheme::TotalLocal => p.offload = OffloadPolicy::Fixed(vec![0.0; m]),
            Scheme::RandBinaryOffload => {
                p.offload = OffloadPolicy::Fixed((0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect())
            }
        }
        p
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.id() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub scheme: String,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub pm_dbm: f64,
    pub pt_dbm: f64,
    pub d_rics_m: f64,
    pub s_m_bits: f64,
    pub sum_safety: f64,
    pub mean_safety: f64,
    pub sum_v2v_rate_bps: f64,
    pub outer_iters: usize,
    pub converged: bool,
    pub wall_ms: f64,
}

/// Full output of a single run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub row: ResultRow,
    pub scenario: Scenario,
    pub channels: ChannelSet,
    pub trace: SolverTrace,
    /// Effective V2V SINR floor used by the outage constraint.
    pub sinr_floor: f64,
}

/// Scenario and channels shared by every scheme at one seed.
pub fn realize(cfg: &ScenarioConfig, seed: u64) -> Result<(Scenario, ChannelSet)> {
    validate_config(cfg).map_err(Error::InvalidConfig)?;
    let sc = build_scenario(cfg, seed)?;
    let ch = assemble_channels(&sc, cfg, seed)?;
    Ok((sc, ch))
}

pub fn run_scheme(scheme: Scheme, cfg: &ScenarioConfig, seed: u64) -> Result<RunOutput> {
    let (sc, ch) = realize(cfg, seed)?;
    run_scheme_on(scheme, cfg, seed, sc, ch)
}

/// Runs `scheme` on a pre-built realization.
pub fn run_scheme_on(
    scheme: Scheme,
    cfg: &ScenarioConfig,
    seed: u64,
    sc: Scenario,
    ch: ChannelSet,
) -> Result<RunOutput> {
    let started = Instant::now();
    let sys = System::new(cfg, &sc, &ch, scheme.mode())?;
    let mut scheme_rng = stream_rng(seed, Stream::Scheme);
    let mut init_rng = stream_rng(seed, Stream::Init);
    let policy = scheme.policy(sys.num_cvs(), sys.num_pairs(), &mut scheme_rng);
    let opts = AioaOptions::from_config(cfg);
    let trace = run_aioa(&sys, &policy, &opts, &mut init_rng, &mut scheme_rng)?;
    let sinr_floor = sys.sinr_floor;
    drop(sys);
    let row = ResultRow {
        seed,
        scheme: scheme.id().to_string(),
        m: cfg.num_cvs,
        n: cfg.num_v2v_pairs,
        l: cfg.num_elements,
        pm_dbm: cfg.cv_power,
        pt_dbm: cfg.v2v_power,
        d_rics_m: cfg.rics_distance(),
        s_m_bits: cfg.task_bits,
        sum_safety: trace.report.sum_safety,
        mean_safety: trace.report.mean_safety(),
        sum_v2v_rate_bps: trace.sum_v2v_rate,
        outer_iters: trace.outer_iters,
        converged: trace.converged,
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(RunOutput {
        row,
        scenario: sc,
        channels: ch,
        trace,
        sinr_floor,
    })
}

/// Config knobs a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    CvPower,
    V2vPower,
    RicsDistance,
    TaskBits,
    NumCvs,
    NumPairs,
    NumElements,
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cv_power" | "pm_dbm" => SweepParam::CvPower,
            "v2v_power" | "pt_dbm" => SweepParam::V2vPower,
            "rics_distance" | "d_rics_m" => SweepParam::RicsDistance,
            "task_bits" | "s_m_bits" => SweepParam::TaskBits,
            "num_cvs" | "M" => SweepParam::NumCvs,
            "num_v2v_pairs" | "N" => SweepParam::NumPairs,
            "num_elements" | "L" => SweepParam::NumElements,
            other => return Err(Error::UnknownParameter(other.to_string())),
        })
    }
}

impl SweepParam {
    /// Copy of `cfg` with this parameter set to `value`.
    pub fn apply(self, cfg: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut c = cfg.clone();
        let count = value.round().max(0.0) as usize;
        match self {
            SweepParam::CvPower => c.cv_power = value,
            SweepParam::V2vPower => c.v2v_power = value,
            SweepParam::RicsDistance => {
                c.rics_position[0] = c.bs_position[0] + value;
                c.rics_position[1] = c.bs_position[1];
            }
            SweepParam::TaskBits => c.task_bits = value,
            SweepParam::NumCvs => c.num_cvs = count,
            SweepParam::NumPairs => c.num_v2v_pairs = count,
            SweepParam::NumElements => c.num_elements = count,
        }
        c
    }
}

/// Inclusive grid `from, from+step, …, ≤ to`.
pub fn grid(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() {
        return Err(Error::Domain(format!("bad grid {from}:{to}:{step}")));
    }
    let count = ((to - from) / step + 1e-9).floor();
    if count < 0.0 {
        return Ok(Vec::new());
    }
    Ok((0..=count as usize).map(|k| from + k as f64 * step).collect())
}

/// Parses `a:b:step`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, s] = parts.as_slice() else {
        return Err(Error::Domain(format!("grid `{spec}` is not a:b:step")));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| Error::Domain(format!("`{t}`: {e}")));
    grid(num(a)?, num(b)?, num(s)?)
}

/// Work pool sized by `RICS_SIM_THREADS` when set.
pub fn work_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var("RICS_SIM_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| Error::Domain(format!("thread pool: {e}")))
}

/// Runs the cross product of values, schemes and seeds.
///
/// Rows come back ordered by value, scheme (as listed) and seed.
pub fn sweep(
    param: SweepParam,
    values: &[f64],
    schemes: &[Scheme],
    seeds: &[u64],
    cfg: &ScenarioConfig,
) -> Result<Vec<ResultRow>> {
    let cells: Vec<(usize, usize, usize)> = (0..values.len())
        .flat_map(|v| (0..schemes.len()).flat_map(move |s| (0..seeds.len()).map(move |k| (v, s, k))))
        .collect();
    let pool = work_pool()?;
    pool.install(|| {
        cells
            .par_iter()
            .map(|&(v, s, k)| {
                let c = param.apply(cfg, values[v]);
                run_scheme(schemes[s], &c, seeds[k]).map(|out| out.row)
            })
            .collect::<Result<Vec<_>>>()
    })
}

pub fn write_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

pub const RESULT_COLUMNS: [&str; 15] = [
    "seed",
    "scheme",
    "M",
    "N",
    "L",
    "pm_dbm",
    "pt_dbm",
    "d_rics_m",
    "s_m_bits",
    "sum_safety",
    "mean_safety",
    "sum_v2v_rate_bps",
    "outer_iters",
    "converged",
    "wall_ms",
];

/// Per-cycle CSV: objective and an amplitude snapshot.
pub fn write_trace<W: Write>(out: W, trace: &SolverTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "objective", "sum_safety", "sum_v2v_rate_bps", "outage_residual", "psi"])?;
    for r in &trace.iterations {
        let psi: Vec<String> = r.psi.iter().map(|p| format!("{p:.6}")).collect();
        w.write_record([
            r.iteration.to_string(),
            r.objective.to_string(),
            r.sum_safety.to_string(),
            r.sum_v2v_rate.to_string(),
            r.outage_residual.to_string(),
            psi.join(";"),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

/// Per-CV CSV with raw and normalized safety.
pub fn write_safety<W: Write>(out: W, trace: &SolverTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "cv",
        "rho",
        "rate_bps",
        "local_delay_s",
        "offload_delay_s",
        "total_delay_s",
        "accuracy",
        "safety",
        "normalized_safety",
    ])?;
    for (m, c) in trace.report.per_cv.iter().enumerate() {
        w.write_record([
            m.to_string(),
            c.rho.to_string(),
            c.rate.to_string(),
            c.local_delay.to_string(),
            c.offload_delay.to_string(),
            c.total_delay.to_string(),
            c.accuracy.to_string(),
            c.safety.to_string(),
            c.normalized_safety.to_string(),
        ])?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

/// One row of the material table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialRow {
    pub psi: f64,
    pub eps_ratio_re: f64,
    pub eps_ratio_im: f64,
    pub feasible: bool,
}

pub fn material_table(psis: &[f64], design: &GrinDesign) -> Result<Vec<MaterialRow>> {
    psis.iter()
        .map(|&psi| {
            let spec = ms_material(psi, design)?;
            Ok(MaterialRow {
                psi,
                eps_ratio_re: spec.eps_ratio.re,
                eps_ratio_im: spec.eps_ratio.im,
                feasible: spec.feasible,
            })
        })
        .collect()
}

pub fn write_material<W: Write>(out: W, rows: &[MaterialRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}
