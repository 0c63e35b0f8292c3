//! `helfrich`: mesh generation, energies, invariant checks, constrained
//! minimisation and the numerical studies of the library, driven from the
//! command line or a TOML config.
//!
//! Exit codes: 0 success, 1 invalid input or failed checks, 2 numerical
//! failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use helfrich::VolumeConvention;

use crate::config::{PatchChoice, RunConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, unreadable or malformed config.
    Usage(String),
    Lib(helfrich::Error),
    /// The computation ran but a required check did not hold.
    ChecksFailed(String),
    /// The computation itself broke down.
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::ChecksFailed(_) => 1,
            CliError::Lib(e) if e.is_numerical() => 2,
            CliError::Lib(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::ChecksFailed(m) => write!(f, "checks failed: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<helfrich::Error> for CliError {
    fn from(e: helfrich::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Lib(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "helfrich", version, about = "Discrete Canham-Helfrich energies on genus-0 triangle meshes")]
pub struct Cli {
    /// TOML run configuration; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Default)]
pub struct EnergyFlags {
    /// Spontaneous curvature.
    #[arg(long, allow_hyphen_values = true)]
    pub c0: Option<f64>,
    /// Tensile stress.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Osmotic pressure.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long, value_enum)]
    pub volume_convention: Option<ConventionArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ConventionArg {
    Flux,
    Geometric,
}

impl From<ConventionArg> for VolumeConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Flux => VolumeConvention::Flux,
            ConventionArg::Geometric => VolumeConvention::Geometric,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Icosphere,
    Ellipsoid,
    TwoSphereNeck,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mesh from one of the built-in families.
    Gen {
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        level: Option<u32>,
        /// Ellipsoid semi-axes a,b,c.
        #[arg(long, value_delimiter = ',')]
        axes: Option<Vec<f64>>,
        /// Neck family parameter.
        #[arg(long)]
        k: Option<u32>,
        #[arg(long)]
        neck_samples: Option<usize>,
        #[arg(long)]
        max_level: Option<u32>,
        /// Uniform jitter amplitude for every vertex coordinate.
        #[arg(long)]
        perturb: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output mesh (.obj or .ply).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Energy breakdown of a mesh.
    Energy {
        mesh: PathBuf,
        #[command(flatten)]
        energy: EnergyFlags,
        /// PLY with per-vertex curvature fields.
        #[arg(long)]
        vertex_data: Option<PathBuf>,
    },
    /// Run every invariant check on a mesh; the file is only read.
    Verify {
        mesh: PathBuf,
        #[command(flatten)]
        energy: EnergyFlags,
        #[arg(long)]
        fd_trials: Option<usize>,
        /// Allowed discretisation deficit below 4π in the Willmore bound.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Constrained gradient flow of the general energy.
    Minimize {
        /// Starting mesh; generated from the [mesh] config section when absent.
        mesh: Option<PathBuf>,
        #[command(flatten)]
        energy: EnergyFlags,
        #[arg(long)]
        area: Option<f64>,
        #[arg(long)]
        volume: Option<f64>,
        /// Isoperimetric ratio 36πV²/A³ used with --area instead of --volume.
        #[arg(long)]
        ratio: Option<f64>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[arg(long)]
        checkpoint_every: Option<usize>,
        /// Continue from a checkpoint directory instead of a mesh.
        #[arg(long, conflicts_with = "mesh")]
        resume: Option<PathBuf>,
        /// Final mesh.
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Energy history CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        vertex_data: Option<PathBuf>,
    },
    /// Minimise the Helfrich energy over a list of isoperimetric ratios.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        #[arg(long, allow_hyphen_values = true)]
        c0: Option<f64>,
        #[arg(long)]
        area: Option<f64>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Grid-refinement study of the conservation-law residuals on a chart.
    Conservation {
        #[arg(long, value_enum)]
        patch: Option<PatchChoice>,
        /// Radius factor for the off-critical cap.
        #[arg(long)]
        factor: Option<f64>,
        /// Catenoid neck radius.
        #[arg(long)]
        neck: Option<f64>,
        #[arg(long, value_delimiter = ',')]
        resolutions: Option<Vec<usize>>,
        #[command(flatten)]
        energy: EnergyFlags,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Energies of the two-sphere neck family; CSV on stdout unless --csv.
    Bubbles {
        #[arg(long, allow_hyphen_values = true)]
        c0: Option<f64>,
        #[arg(long)]
        kmin: Option<u32>,
        #[arg(long)]
        kmax: Option<u32>,
        #[arg(long)]
        neck_samples: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the resolved configuration as TOML.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if cli.report.is_some() {
        config.output.report = cli.report.clone();
    }
    commands::dispatch(cli.command, config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("helfrich: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
