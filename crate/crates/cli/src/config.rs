use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::Failure;

#[derive(Debug, Parser)]
#[command(
    name = "grunsky-lab",
    version,
    about = "Grunsky and Teichmüller norm experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the exterior map of a quadrilateral and dump its boundary trace.
    Map(RunArgs),
    /// κ_N convergence table for a polygon or a closed-form oracle.
    Grunsky(RunArgs),
    /// Norm bracket, infinitesimal Grunsky norm and boundary probes of a Beltrami coefficient.
    Extremality(RunArgs),
    /// Metric grids and curvature certificates along a deformation disk.
    Deform(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Map(_) => "map",
            Self::Grunsky(_) => "grunsky",
            Self::Extremality(_) => "extremality",
            Self::Deform(_) => "deform",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Self::Map(a) | Self::Grunsky(a) | Self::Extremality(a) | Self::Deform(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON input: polygon, oracle, μ or direction spec depending on the command.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Truncation order(s), comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Grid resolution: boundary samples (map) or nodes per unit length (deform).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Main tolerance of the command.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of equally spaced boundary points probed.
    #[arg(long = "probe-points")]
    pub probe_points: Option<usize>,
    /// Last index of the concentrating sequence.
    #[arg(long = "p-max")]
    pub p_max: Option<u32>,
}

/// Everything that determines a run's output, with defaults filled in.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub input: String,
    #[serde(rename = "N")]
    pub n: Vec<usize>,
    pub grid: usize,
    pub tol: f64,
    pub seed: u64,
    pub probe_points: usize,
    pub p_max: u32,
}

struct Defaults {
    n: &'static [usize],
    grid: usize,
    tol: f64,
}

fn defaults(command: &str) -> Defaults {
    match command {
        "map" => Defaults {
            n: &[32],
            grid: 256,
            tol: 1e-12,
        },
        "grunsky" => Defaults {
            n: &[8, 16, 32, 64],
            grid: 0,
            tol: 1e-9,
        },
        "extremality" => Defaults {
            n: &[16],
            grid: 0,
            tol: 1e-3,
        },
        _ => Defaults {
            n: &[8],
            grid: 128,
            tol: 1e-2,
        },
    }
}

impl RunConfig {
    pub fn resolve(command: &Command) -> Result<Self, Failure> {
        let name = command.name();
        let a = command.args();
        let d = defaults(name);
        let cfg = Self {
            command: name.to_string(),
            input: a.input.display().to_string(),
            n: if a.n.is_empty() {
                d.n.to_vec()
            } else {
                a.n.clone()
            },
            grid: a.grid.unwrap_or(d.grid),
            tol: a.tol.unwrap_or(d.tol),
            seed: a.seed,
            probe_points: a.probe_points.unwrap_or(8),
            p_max: a.p_max.unwrap_or(12),
        };
        if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
            return Err(Failure::Usage(format!(
                "--tol must be positive, got {}",
                cfg.tol
            )));
        }
        if cfg.n.iter().any(|&n| n == 0 || n > 128) {
            return Err(Failure::Usage("--N values must lie in 1..=128".into()));
        }
        if name != "grunsky" && cfg.n.len() != 1 {
            return Err(Failure::Usage(format!("{name} takes a single --N value")));
        }
        if (name == "map" || name == "deform") && cfg.grid < 4 {
            return Err(Failure::Usage("--grid must be at least 4".into()));
        }
        if cfg.probe_points == 0 {
            return Err(Failure::Usage("--probe-points must be positive".into()));
        }
        if !(1..=48).contains(&cfg.p_max) {
            return Err(Failure::Usage("--p-max must lie in 1..=48".into()));
        }
        Ok(cfg)
    }
}

/// Top-level shape of every JSON report.
#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub command: String,
    pub versions: BTreeMap<&'static str, &'static str>,
    pub config: RunConfig,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(config: &RunConfig, tolerances: BTreeMap<&'static str, f64>, result: T) -> Self {
        let versions = BTreeMap::from([
            ("grunsky-lab", env!("CARGO_PKG_VERSION")),
            ("grunsky-core", grunsky_core::VERSION),
        ]);
        Self {
            command: config.command.clone(),
            versions,
            config: config.clone(),
            tolerances,
            result,
        }
    }
}
