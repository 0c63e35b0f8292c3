//! Curvature-concentration diagnostics for neck pinching.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, EnergyParams};
use crate::error::{Error, Result};
use crate::generators::{gen_two_sphere_neck, NeckProfile};
use crate::geometry::{diameter, vertex_geometry};
use crate::mesh::TriangleMesh;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubblingOptions {
    /// Ball radius as a fraction of the reference diameter.
    #[serde(default = "default_ball_fraction")]
    pub ball_fraction: f64,
    /// A neck is flagged when the concentration exceeds 8π − delta ...
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// ... and its core has shrunk below reference diameter / shrink_factor.
    #[serde(default = "default_shrink")]
    pub shrink_factor: f64,
    /// Maximum number of candidates reported.
    #[serde(default = "default_max_candidates")]
    pub max_candidates: usize,
}

fn default_ball_fraction() -> f64 {
    0.125
}
fn default_delta() -> f64 {
    0.5
}
fn default_shrink() -> f64 {
    10.0
}
fn default_max_candidates() -> usize {
    4
}

impl Default for BubblingOptions {
    fn default() -> Self {
        Self {
            ball_fraction: default_ball_fraction(),
            delta: default_delta(),
            shrink_factor: default_shrink(),
            max_candidates: default_max_candidates(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeckCandidate {
    pub vertex: usize,
    pub position: [f64; 3],
    /// Σ A_j |II|²_j over the ball around the vertex.
    pub concentration: f64,
    /// Diameter of the smallest centred ball holding half the concentration.
    pub core_diameter: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BubblingReport {
    pub min_edge: f64,
    pub mean_edge: f64,
    pub edge_ratio: f64,
    pub reference_diameter: f64,
    pub ball_radius: f64,
    pub threshold: f64,
    pub max_concentration: f64,
    pub candidates: Vec<NeckCandidate>,
    pub neck_detected: bool,
}

/// Scans balls of radius `ball_fraction · reference_diameter` for
/// concentrated ∫|II|². Candidates are picked greedily by concentration with
/// non-overlapping balls. When no reference is given, the mesh's own
/// diameter is used.
pub fn bubbling_diagnostics(
    mesh: &TriangleMesh,
    reference_diameter: Option<f64>,
    options: &BubblingOptions,
) -> Result<BubblingReport> {
    let g = vertex_geometry(mesh)?;
    let density: Vec<f64> = (0..g.len()).map(|i| (g.area[i] * g.second_fundamental_sq(i)).max(0.0)).collect();
    let edges = mesh.edges();
    let lengths: Vec<f64> = edges.iter().map(|&[a, b]| (mesh.vertices[a] - mesh.vertices[b]).norm()).collect();
    let min_edge = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_edge = lengths.iter().sum::<f64>() / lengths.len().max(1) as f64;
    let reference = reference_diameter.unwrap_or_else(|| diameter(mesh));
    let radius = options.ball_fraction * reference;
    let threshold = 8.0 * PI - options.delta;

    let concentration: Vec<f64> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|i| {
            let xi = mesh.vertices[i];
            mesh.vertices
                .iter()
                .zip(&density)
                .filter(|(x, _)| (*x - xi).norm() <= radius)
                .map(|(_, d)| d)
                .sum()
        })
        .collect();
    let max_concentration = concentration.iter().copied().fold(0.0, f64::max);

    let mut order: Vec<usize> = (0..mesh.num_vertices()).collect();
    order.sort_by(|&a, &b| concentration[b].total_cmp(&concentration[a]).then(a.cmp(&b)));
    let mut candidates: Vec<NeckCandidate> = Vec::new();
    for i in order {
        if candidates.len() >= options.max_candidates || concentration[i] < 0.5 * threshold {
            break;
        }
        let xi = mesh.vertices[i];
        if candidates.iter().any(|c| (xi - nalgebra::Vector3::from(c.position)).norm() < 2.0 * radius) {
            continue;
        }
        let core = core_radius(mesh, &density, i, radius, 0.5 * concentration[i]);
        let flagged = concentration[i] >= threshold && 2.0 * core <= reference / options.shrink_factor;
        candidates.push(NeckCandidate {
            vertex: i,
            position: [xi.x, xi.y, xi.z],
            concentration: concentration[i],
            core_diameter: 2.0 * core,
            flagged,
        });
    }
    let neck_detected = candidates.iter().any(|c| c.flagged);
    Ok(BubblingReport {
        min_edge,
        mean_edge,
        edge_ratio: min_edge / mean_edge,
        reference_diameter: reference,
        ball_radius: radius,
        threshold,
        max_concentration,
        candidates,
        neck_detected,
    })
}

/// One member of the two-sphere neck family with its energies and the
/// two-sphere reference values.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeckFamilyRow {
    pub k: u32,
    pub helfrich: f64,
    pub willmore: f64,
    pub area: f64,
    pub volume: f64,
    /// 4π[(1 + 1/k)² + (1 − 1/k)²] = 8π(1 + 1/k²).
    pub area_target: f64,
    /// (4π/3)[(1 + 1/k)³ + (1 − 1/k)³].
    pub volume_target: f64,
    /// Area of the glued smooth surface (spheres minus caps plus catenoid).
    pub profile_area: f64,
    pub neck_detected: bool,
    pub max_concentration: f64,
}

impl NeckFamilyRow {
    pub fn area_error(&self) -> f64 {
        (self.area - self.area_target).abs() / self.area_target
    }

    pub fn volume_error(&self) -> f64 {
        (self.volume - self.volume_target).abs() / self.volume_target
    }
}

/// Evaluates (without evolving) the neck family for k in `ks`.
pub fn neck_family_study(c0: f64, ks: &[u32], neck_samples: usize, options: &BubblingOptions) -> Result<Vec<NeckFamilyRow>> {
    let params = EnergyParams::new(c0, 0.0, 0.0);
    params.validate()?;
    if ks.is_empty() {
        return Err(Error::InvalidParameter("the neck family study needs at least one k".into()));
    }
    ks.par_iter()
        .map(|&k| {
            let mesh = gen_two_sphere_neck(k, neck_samples)?;
            let profile = NeckProfile::new(k)?;
            let e = energy(&mesh, &params)?;
            let diag = bubbling_diagnostics(&mesh, None, options)?;
            let (ra, rb) = (profile.radius_large, profile.radius_small);
            Ok(NeckFamilyRow {
                k,
                helfrich: e.helfrich,
                willmore: e.willmore,
                area: e.area,
                volume: e.volume,
                area_target: 4.0 * PI * (ra * ra + rb * rb),
                volume_target: 4.0 * PI / 3.0 * (ra.powi(3) + rb.powi(3)),
                profile_area: profile.analytic_area(),
                neck_detected: diag.neck_detected,
                max_concentration: diag.max_concentration,
            })
        })
        .collect()
}

/// True when the column is strictly decreasing.
pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

/// Smallest radius around vertex `i` whose ball carries `target` of the density.
fn core_radius(mesh: &TriangleMesh, density: &[f64], i: usize, radius: f64, target: f64) -> f64 {
    let xi = mesh.vertices[i];
    let mut within: Vec<(f64, f64)> = mesh
        .vertices
        .iter()
        .zip(density)
        .map(|(x, &d)| ((x - xi).norm(), d))
        .filter(|&(r, _)| r <= radius)
        .collect();
    within.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (r, d) in within {
        acc += d;
        if acc >= target {
            return r;
        }
    }
    radius
}
