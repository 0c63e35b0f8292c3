//! TOML run configuration. Every section is optional; command-line flags
//! take precedence over values read from the file.

use std::path::{Path, PathBuf};

use helfrich::generators::MeshFamilyParams;
use helfrich::optimize::{ConstraintSpec, MinimizeOptions};
use helfrich::{EnergyParams, VolumeConvention};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    pub energy: EnergySection,
    pub mesh: MeshFamilyParams,
    pub gen: GenSection,
    pub constraints: ConstraintSection,
    pub minimize: MinimizeOptions,
    pub sweep: SweepSection,
    pub conservation: ConservationSection,
    pub bubbles: BubblesSection,
    pub verify: VerifySection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            energy: EnergySection::default(),
            mesh: MeshFamilyParams::default(),
            gen: GenSection::default(),
            constraints: ConstraintSection::default(),
            minimize: MinimizeOptions::default(),
            sweep: SweepSection::default(),
            conservation: ConservationSection::default(),
            bubbles: BubblesSection::default(),
            verify: VerifySection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnergySection {
    pub c0: f64,
    pub alpha: f64,
    pub rho: f64,
    pub volume_convention: VolumeConvention,
}

impl EnergySection {
    pub fn params(&self) -> EnergyParams {
        EnergyParams::new(self.c0, self.alpha, self.rho)
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenSection {
    /// Uniform vertex jitter amplitude applied after generation.
    pub perturb: f64,
    pub seed: u64,
}

/// Either explicit targets or an area plus isoperimetric ratio.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstraintSection {
    pub area: Option<f64>,
    pub volume: Option<f64>,
    pub ratio: Option<f64>,
}

impl ConstraintSection {
    pub fn resolve(&self) -> Result<Option<ConstraintSpec>, CliError> {
        let spec = match (self.area, self.volume, self.ratio) {
            (None, None, None) => return Ok(None),
            (Some(a), Some(v), None) => ConstraintSpec::new(a, v)?,
            (Some(a), None, Some(r)) => ConstraintSpec::from_ratio(a, r)?,
            _ => {
                return Err(CliError::Usage(
                    "constraints need either area and volume, or area and ratio".into(),
                ))
            }
        };
        spec.check()?;
        Ok(Some(spec))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub ratios: Vec<f64>,
    pub area: f64,
    pub level: u32,
    pub threads: Option<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { ratios: vec![0.95, 0.9, 0.8, 0.7], area: 4.0 * std::f64::consts::PI, level: 3, threads: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PatchChoice {
    /// Sphere cap at the critical radius for the energy parameters.
    Critical,
    /// Sphere cap at `factor` times the critical radius.
    OffCritical,
    Catenoid,
    Plane,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConservationSection {
    pub patch: PatchChoice,
    pub factor: f64,
    pub neck: f64,
    pub resolutions: Vec<usize>,
    /// Smallest fitted order counted as convergence.
    pub min_order: f64,
}

impl Default for ConservationSection {
    fn default() -> Self {
        Self { patch: PatchChoice::Critical, factor: 1.1, neck: 0.7, resolutions: vec![65, 129], min_order: 1.5 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BubblesSection {
    pub kmin: u32,
    pub kmax: u32,
    pub neck_samples: usize,
}

impl Default for BubblesSection {
    fn default() -> Self {
        Self { kmin: 2, kmax: 12, neck_samples: 64 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub fd_trials: usize,
    pub fd_seed: u64,
    pub fd_tolerance: f64,
    pub gauss_bonnet_tolerance: f64,
    /// Discretisation deficit allowed below 4π; defaults to the deficit of
    /// the icosphere with the closest vertex count.
    pub delta: Option<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { fd_trials: 10, fd_seed: 7, fd_tolerance: 1e-5, gauss_bonnet_tolerance: 1e-8, delta: None }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// JSON report destination; stdout when unset.
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    /// PLY with per-vertex scalar fields for plotting.
    pub vertex_data: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(e.to_string()))?;
        if config.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::Usage(format!(
                "config schema_version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Usage(e.to_string()))
    }
}
