use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rics_core::harness::{self, parse_grid, Scheme, SweepParam};
use rics_core::metasurface::GrinDesign;
use rics_core::{validate, ScenarioConfig, Suite};

#[derive(Parser)]
#[command(name = "rics-sim", version, about = "RICS-assisted vehicular offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario with one scheme.
    Run {
        /// JSON config; defaults to the built-in parameter table.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "aioa")]
        scheme: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Result CSV, `-` for stdout.
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// Per-iteration CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Per-CV safety CSV.
        #[arg(long)]
        safety: Option<PathBuf>,
    },
    /// Run a grid of one parameter across schemes and seeds.
    Sweep {
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long)]
        step: f64,
        /// Comma-separated scheme ids.
        #[arg(long, default_value = "aioa")]
        schemes: String,
        /// Number of seeds, starting at `--first-seed`.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Check closed forms and solvers against brute-force oracles.
    Validate {
        #[arg(long)]
        suite: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Tabulate GRIN-metasurface permittivity over a Ψ grid.
    Material {
        /// `a:b:step`.
        #[arg(long)]
        psi_grid: String,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Print the default config as JSON.
    Config,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ScenarioConfig> {
    let cfg = match path {
        Some(p) => ScenarioConfig::from_path(p)?,
        None => ScenarioConfig::reference(),
    };
    Ok(cfg.validated()?)
}

fn sink(path: &Path) -> anyhow::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Box::new(io::BufWriter::new(f)))
    }
}

fn parse_schemes(list: &str) -> anyhow::Result<Vec<Scheme>> {
    if list.trim() == "all" {
        return Ok(Scheme::ALL.to_vec());
    }
    list.split(',')
        .map(|s| s.trim().parse::<Scheme>().map_err(Into::into))
        .collect()
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Run {
            config,
            scheme,
            seed,
            out,
            trace,
            safety,
        } => {
            let cfg = load_config(config.as_deref())?;
            let scheme: Scheme = scheme.parse()?;
            let result = harness::run_scheme(scheme, &cfg, seed)?;
            harness::write_rows(sink(&out)?, std::slice::from_ref(&result.row))?;
            if let Some(p) = trace {
                harness::write_trace(sink(&p)?, &result.trace)?;
            }
            if let Some(p) = safety {
                harness::write_safety(sink(&p)?, &result.trace)?;
            }
            for flag in &result.trace.flags {
                eprintln!("note: {flag}");
            }
            Ok(true)
        }
        Command::Sweep {
            param,
            from,
            to,
            step,
            schemes,
            seeds,
            first_seed,
            out,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let param: SweepParam = param.parse()?;
            let values = harness::grid(from, to, step)?;
            if values.is_empty() {
                bail!("empty grid {from}:{to}:{step}");
            }
            let schemes = parse_schemes(&schemes)?;
            let seeds: Vec<u64> = (first_seed..first_seed + seeds).collect();
            let rows = harness::sweep(param, &values, &schemes, &seeds, &cfg)?;
            harness::write_rows(sink(&out)?, &rows)?;
            Ok(true)
        }
        Command::Validate { suite, config } => {
            let cfg = load_config(config.as_deref())?;
            let suite: Suite = suite.parse()?;
            let report = validate(suite, &cfg)?;
            println!("{report}");
            Ok(report.passed())
        }
        Command::Material { psi_grid, out } => {
            let psis = parse_grid(&psi_grid)?;
            let rows = harness::material_table(&psis, &GrinDesign::default())?;
            harness::write_material(sink(&out)?, &rows)?;
            Ok(true)
        }
        Command::Config => {
            println!("{}", serde_json::to_string_pretty(&ScenarioConfig::reference())?);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
