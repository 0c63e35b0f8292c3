//! Willmore, Canham-Helfrich and general (α, ρ) energies, plus the scalar
//! inequalities and thresholds built from them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{enclosed_volume, total_area, vertex_geometry, InequalityReport, VertexGeometry};
use crate::intersect::{self_intersection_check, IntersectionReport};
use crate::mesh::TriangleMesh;

/// Spontaneous curvature c0, tensile stress α and osmotic pressure ρ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub rho: f64,
}

impl EnergyParams {
    pub fn new(c0: f64, alpha: f64, rho: f64) -> Self {
        Self { c0, alpha, rho }
    }

    pub fn willmore() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.alpha.is_finite() && self.rho.is_finite()) {
            return Err(Error::InvalidParameter("energy parameters must be finite".into()));
        }
        if self.alpha < 0.0 {
            return Err(Error::InvalidParameter(format!("alpha = {} must be non-negative", self.alpha)));
        }
        if self.rho < 0.0 {
            return Err(Error::InvalidParameter(format!("rho = {} must be non-negative", self.rho)));
        }
        Ok(())
    }
}

/// How the pressure term is evaluated: ρ·∫n·Φ (flux) or 3ρ·Vol (geometric).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolumeConvention {
    #[default]
    Flux,
    Geometric,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub willmore: f64,
    pub helfrich: f64,
    /// Total mean curvature ∫H dμ.
    pub cross: f64,
    pub area: f64,
    pub raw_flux: f64,
    pub volume: f64,
    /// helfrich + α·area + ρ·(pressure term).
    pub general: f64,
    pub params: EnergyParams,
}

impl EnergyBreakdown {
    /// |helfrich − (willmore − 2c0·cross + c0²·area)| relative to the largest term.
    pub fn expansion_defect(&self) -> f64 {
        let c0 = self.params.c0;
        let expanded = self.willmore - 2.0 * c0 * self.cross + c0 * c0 * self.area;
        let scale = self.willmore.abs().max((2.0 * c0 * self.cross).abs()).max(c0 * c0 * self.area).max(1e-300);
        (self.helfrich - expanded).abs() / scale
    }
}

pub fn energy(mesh: &TriangleMesh, params: &EnergyParams) -> Result<EnergyBreakdown> {
    energy_with_convention(mesh, params, VolumeConvention::Flux)
}

pub fn energy_with_convention(
    mesh: &TriangleMesh,
    params: &EnergyParams,
    convention: VolumeConvention,
) -> Result<EnergyBreakdown> {
    params.validate()?;
    let g = vertex_geometry(mesh)?;
    Ok(breakdown_from_geometry(mesh, &g, params, convention))
}

pub fn breakdown_from_geometry(
    mesh: &TriangleMesh,
    g: &VertexGeometry,
    params: &EnergyParams,
    convention: VolumeConvention,
) -> EnergyBreakdown {
    let c0 = params.c0;
    let (mut willmore, mut helfrich, mut cross) = (0.0, 0.0, 0.0);
    for i in 0..g.len() {
        let (a, h) = (g.area[i], g.mean_curvature[i]);
        willmore += a * h * h;
        helfrich += a * (h - c0) * (h - c0);
        cross += a * h;
    }
    let area = total_area(mesh);
    let fv = enclosed_volume(mesh);
    let pressure = match convention {
        VolumeConvention::Flux => fv.raw_flux,
        VolumeConvention::Geometric => 3.0 * crate::geometry::signed_volume(mesh),
    };
    EnergyBreakdown {
        willmore,
        helfrich,
        cross,
        area,
        raw_flux: fv.raw_flux,
        volume: fv.volume,
        general: helfrich + params.alpha * area + params.rho * pressure,
        params: *params,
    }
}

/// ∫H² ≤ 2𝓗^{c0} + 2c0²·A0, valid whenever area ≤ A0.
pub fn check_willmore_helfrich_bound(mesh: &TriangleMesh, c0: f64, a0: f64) -> Result<InequalityReport> {
    let e = energy(mesh, &EnergyParams::new(c0, 0.0, 0.0))?;
    if e.area > a0 * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "mesh area {} exceeds the constraint area A0 = {a0}",
            e.area
        )));
    }
    let rhs = 2.0 * e.helfrich + 2.0 * c0 * c0 * a0;
    Ok(InequalityReport::new("willmore_helfrich_bound", e.willmore, rhs, 1e-12 * rhs.abs().max(1.0)))
}

/// ∫H² ≥ 4π(1 − δ_mesh), with δ_mesh the discretization deficit of the
/// reference sphere at comparable resolution.
pub fn check_willmore_lower_bound(mesh: &TriangleMesh, delta_mesh: f64) -> Result<InequalityReport> {
    let e = energy(mesh, &EnergyParams::willmore())?;
    let bound = 4.0 * PI * (1.0 - delta_mesh.max(0.0));
    Ok(InequalityReport::new("willmore_lower_bound", bound, e.willmore, 1e-12 * bound))
}

/// Isoperimetric feasibility A0³ ≥ 36πV0² (equality allowed up to rounding).
pub fn isoperimetric_feasible(a0: f64, v0: f64) -> bool {
    a0 > 0.0 && v0 > 0.0 && a0.powi(3) >= 36.0 * PI * v0 * v0 * (1.0 - 1e-12)
}

/// ε = (√(8π) − √(inf W)) / (2√A0).
pub fn epsilon_embeddedness(a0: f64, v0: f64, inf_willmore: f64) -> Result<f64> {
    if !isoperimetric_feasible(a0, v0) {
        return Err(Error::ConstraintViolation(format!(
            "(A0, V0) = ({a0}, {v0}) violates A0³ ≥ 36πV0²"
        )));
    }
    if !(4.0 * PI * (1.0 - 1e-12)..8.0 * PI).contains(&inf_willmore) {
        return Err(Error::Domain(format!("inf_willmore = {inf_willmore} lies outside [4π, 8π)")));
    }
    Ok(((8.0 * PI).sqrt() - inf_willmore.max(4.0 * PI).sqrt()) / (2.0 * a0.sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingStatus {
    /// Below the threshold and embedded.
    Consistent,
    /// Below the threshold yet self-intersecting.
    Inconsistent,
    /// At or above the threshold: no embeddedness claim is made.
    AboveThreshold,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddednessReport {
    pub willmore: f64,
    pub threshold: f64,
    pub margin: f64,
    pub intersections: IntersectionReport,
    pub status: EmbeddingStatus,
}

/// Li-Yau: ∫H² < 8π forces an embedding.
pub fn check_li_yau_embeddedness(mesh: &TriangleMesh, tolerance: f64) -> Result<EmbeddednessReport> {
    let e = energy(mesh, &EnergyParams::willmore())?;
    let threshold = 8.0 * PI;
    let intersections = self_intersection_check(mesh);
    let status = if e.willmore < threshold * (1.0 - tolerance) {
        if intersections.embedded {
            EmbeddingStatus::Consistent
        } else {
            EmbeddingStatus::Inconsistent
        }
    } else if !intersections.embedded {
        EmbeddingStatus::Consistent
    } else {
        EmbeddingStatus::AboveThreshold
    };
    Ok(EmbeddednessReport { willmore: e.willmore, threshold, margin: threshold - e.willmore, intersections, status })
}
