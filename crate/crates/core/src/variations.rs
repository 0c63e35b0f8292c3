//! Exact gradients of the discrete energies, finite-difference verification
//! and the discrete first-variation identity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual::Dual;
use crate::energy::EnergyParams;
use crate::error::Result;
use crate::geometry::{vertex_geometry, IdentityReport, VertexGeometry};
use crate::local::{face_flux, face_local};
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Area,
    Volume,
    RawFlux,
    TotalMeanCurvature,
    Willmore,
    /// The general energy 𝓗^{c0}_{α,ρ} for the supplied parameters.
    #[serde(alias = "general")]
    Helfrich,
}

impl Functional {
    pub const ALL: [Functional; 6] = [
        Functional::Area,
        Functional::Volume,
        Functional::RawFlux,
        Functional::TotalMeanCurvature,
        Functional::Willmore,
        Functional::Helfrich,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Functional::Area => "area",
            Functional::Volume => "volume",
            Functional::RawFlux => "raw_flux",
            Functional::TotalMeanCurvature => "total_mean_curvature",
            Functional::Willmore => "willmore",
            Functional::Helfrich => "helfrich",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "area" => Some(Functional::Area),
            "volume" => Some(Functional::Volume),
            "raw_flux" | "flux" => Some(Functional::RawFlux),
            "total_mean_curvature" | "tmc" => Some(Functional::TotalMeanCurvature),
            "willmore" => Some(Functional::Willmore),
            "helfrich" | "general" => Some(Functional::Helfrich),
            _ => None,
        }
    }
}

/// Per-vertex covector g_i with E(Φ + tω) = E(Φ) + t Σ g_i·ω_i + O(t²).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiscreteGradient {
    pub functional: Functional,
    pub values: Vec<Vec3>,
}

impl DiscreteGradient {
    pub fn pair(&self, omega: &[Vec3]) -> f64 {
        self.values.iter().zip(omega).map(|(g, w)| g.dot(w)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|g| g.norm_squared()).sum::<f64>().sqrt()
    }

    /// Σ g_i: pairing with the three translations.
    pub fn net_force(&self) -> Vec3 {
        self.values.iter().fold(Vec3::zeros(), |acc, g| acc + g)
    }

    /// Σ Φ_i × g_i: pairing with the three infinitesimal rotations.
    pub fn net_torque(&self, mesh: &TriangleMesh) -> Vec3 {
        mesh.vertices.iter().zip(&self.values).fold(Vec3::zeros(), |acc, (x, g)| acc + x.cross(g))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flat_map(|g| [g.x, g.y, g.z]).collect()
    }
}

fn corners(mesh: &TriangleMesh, f: usize) -> [[f64; 3]; 3] {
    let [a, b, c] = mesh.corners(f);
    [[a.x, a.y, a.z], [b.x, b.y, b.z], [c.x, c.y, c.z]]
}

fn scatter(mesh: &TriangleMesh, per_face: Vec<[Vec3; 3]>) -> Vec<Vec3> {
    let mut g = vec![Vec3::zeros(); mesh.num_vertices()];
    for (face, contrib) in mesh.faces.iter().zip(per_face) {
        for c in 0..3 {
            g[face[c]] += contrib[c];
        }
    }
    g
}

/// Exact gradient of the triangle-area sum.
pub fn grad_area(mesh: &TriangleMesh) -> Result<DiscreteGradient> {
    let g = vertex_geometry(mesh)?;
    Ok(DiscreteGradient { functional: Functional::Area, values: g.lvec })
}

/// Exact gradient of the signed tetrahedron-sum volume.
pub fn grad_volume(mesh: &TriangleMesh) -> Result<DiscreteGradient> {
    let per_face = (0..mesh.num_faces())
        .map(|f| {
            let [a, b, c] = mesh.corners(f);
            [b.cross(&c) / 6.0, c.cross(&a) / 6.0, a.cross(&b) / 6.0]
        })
        .collect();
    Ok(DiscreteGradient { functional: Functional::Volume, values: scatter(mesh, per_face) })
}

/// Exact gradient of ∫n·Φ dμ = 3·volume.
pub fn grad_raw_flux(mesh: &TriangleMesh) -> Result<DiscreteGradient> {
    let mut g = grad_volume(mesh)?;
    g.values.iter_mut().for_each(|v| *v *= 3.0);
    g.functional = Functional::RawFlux;
    Ok(g)
}

/// Adjoint of a per-vertex energy e(A_i, Lvec_i, m_i) with respect to those inputs.
#[derive(Clone, Copy, Default)]
struct VertexAdjoint {
    area: f64,
    lvec: Vec3,
    area_vector: Vec3,
}

/// Gradient of w·Σ A_i H_i² + t·Σ A_i H_i by reverse accumulation through the
/// per-vertex sums and forward-mode face Jacobians.
fn curvature_gradient(mesh: &TriangleMesh, g: &VertexGeometry, w: f64, t: f64) -> Vec<Vec3> {
    let adj: Vec<VertexAdjoint> = (0..g.len())
        .map(|i| {
            let m = g.area_vector[i];
            let m_norm = m.norm();
            let n = m / m_norm;
            let l = g.lvec[i];
            let s = n.dot(&l);
            let a = g.area[i];
            // ∂s/∂L = n, ∂s/∂m = (I − n nᵀ) L / |m|
            let ds_dm = (l - n * s) / m_norm;
            // Σ A H² term: s²/(4A);  Σ A H term: s/2
            let de_ds = w * s / (2.0 * a) + 0.5 * t;
            VertexAdjoint { area: -w * s * s / (4.0 * a * a), lvec: n * de_ds, area_vector: ds_dm * de_ds }
        })
        .collect();

    let per_face: Vec<[Vec3; 3]> = (0..mesh.num_faces())
        .into_par_iter()
        .map(|f| {
            let face = mesh.faces[f];
            let p = corners(mesh, f);
            let mut pd = [[Dual::<9>::constant(0.0); 3]; 3];
            for c in 0..3 {
                for k in 0..3 {
                    pd[c][k] = Dual::variable(p[c][k], 3 * c + k);
                }
            }
            let loc = face_local(pd);
            let mut grad = [0.0; 9];
            for c in 0..3 {
                let a = adj[face[c]];
                for (slot, gv) in grad.iter_mut().enumerate() {
                    let mut acc = a.area * loc.corner_area[c].d[slot];
                    for k in 0..3 {
                        acc += a.lvec[k] * loc.corner_lvec[c][k].d[slot];
                        acc += a.area_vector[k] * loc.area_vector[k].d[slot];
                    }
                    *gv += acc;
                }
            }
            [
                Vec3::new(grad[0], grad[1], grad[2]),
                Vec3::new(grad[3], grad[4], grad[5]),
                Vec3::new(grad[6], grad[7], grad[8]),
            ]
        })
        .collect();
    scatter(mesh, per_face)
}

pub fn grad_total_mean_curvature(mesh: &TriangleMesh) -> Result<DiscreteGradient> {
    let g = vertex_geometry(mesh)?;
    Ok(DiscreteGradient {
        functional: Functional::TotalMeanCurvature,
        values: curvature_gradient(mesh, &g, 0.0, 1.0),
    })
}

pub fn grad_willmore(mesh: &TriangleMesh) -> Result<DiscreteGradient> {
    let g = vertex_geometry(mesh)?;
    Ok(DiscreteGradient { functional: Functional::Willmore, values: curvature_gradient(mesh, &g, 1.0, 0.0) })
}

/// Exact gradient of the general energy, assembled as
/// grad W − 2c0 grad TMC + (c0² + α) grad area + ρ grad raw_flux.
pub fn grad_helfrich(mesh: &TriangleMesh, params: &EnergyParams) -> Result<DiscreteGradient> {
    params.validate()?;
    let g = vertex_geometry(mesh)?;
    let mut values = curvature_gradient(mesh, &g, 1.0, -2.0 * params.c0);
    let area_coeff = params.c0 * params.c0 + params.alpha;
    let flux = if params.rho != 0.0 { Some(grad_raw_flux(mesh)?) } else { None };
    for i in 0..values.len() {
        values[i] += g.lvec[i] * area_coeff;
        if let Some(fl) = &flux {
            values[i] += fl.values[i] * params.rho;
        }
    }
    Ok(DiscreteGradient { functional: Functional::Helfrich, values })
}

pub fn gradient(mesh: &TriangleMesh, functional: Functional, params: &EnergyParams) -> Result<DiscreteGradient> {
    match functional {
        Functional::Area => grad_area(mesh),
        Functional::Volume => grad_volume(mesh),
        Functional::RawFlux => grad_raw_flux(mesh),
        Functional::TotalMeanCurvature => grad_total_mean_curvature(mesh),
        Functional::Willmore => grad_willmore(mesh),
        Functional::Helfrich => grad_helfrich(mesh, params),
    }
}

/// Additive pieces whose sum is the functional: per-vertex curvature terms
/// followed by per-face area and flux terms.
pub fn energy_terms(mesh: &TriangleMesh, functional: Functional, params: &EnergyParams) -> Result<Vec<f64>> {
    let face_area = |f: usize| face_local(corners(mesh, f)).area;
    let volume = |f: usize| face_flux(corners(mesh, f)) / 3.0;
    Ok(match functional {
        Functional::Area => (0..mesh.num_faces()).map(face_area).collect(),
        Functional::Volume => (0..mesh.num_faces()).map(volume).collect(),
        Functional::RawFlux => (0..mesh.num_faces()).map(|f| 3.0 * volume(f)).collect(),
        Functional::TotalMeanCurvature | Functional::Willmore | Functional::Helfrich => {
            let g = vertex_geometry(mesh)?;
            let c0 = params.c0;
            let mut terms: Vec<f64> = (0..g.len())
                .map(|i| {
                    let (a, h) = (g.area[i], g.mean_curvature[i]);
                    match functional {
                        Functional::TotalMeanCurvature => a * h,
                        Functional::Willmore => a * h * h,
                        _ => a * h * h - 2.0 * c0 * a * h,
                    }
                })
                .collect();
            if functional == Functional::Helfrich {
                let area_coeff = c0 * c0 + params.alpha;
                terms.extend((0..mesh.num_faces()).map(|f| area_coeff * face_area(f) + params.rho * 3.0 * volume(f)));
            }
            terms
        }
    })
}

pub fn functional_value(mesh: &TriangleMesh, functional: Functional, params: &EnergyParams) -> Result<f64> {
    Ok(energy_terms(mesh, functional, params)?.iter().sum())
}

/// Configuration of a finite-difference gradient check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckConfig {
    pub trials: usize,
    /// Step as a fraction of the bounding-box diagonal.
    pub relative_step: f64,
    pub seed: u64,
    pub tolerance: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { trials: 10, relative_step: 1e-6, seed: 7, tolerance: 1e-5 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub functional: Functional,
    pub trials: usize,
    pub step: f64,
    pub max_relative_error: f64,
    pub relative_errors: Vec<f64>,
    pub analytic: Vec<f64>,
    pub finite_difference: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Random unit directions ω (unit norm over all 3V coordinates).
pub fn random_directions(n_vertices: usize, trials: usize, seed: u64) -> Vec<Vec<Vec3>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let mut w: Vec<Vec3> = (0..n_vertices)
                .map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let norm = w.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
            w.iter_mut().for_each(|v| *v /= norm);
            w
        })
        .collect()
}

/// Compares Σ g_i·ω_i with (E(Φ+hω) − E(Φ−hω))/2h. The difference is
/// accumulated term by term, which avoids cancellation in the full sums.
pub fn fd_gradient_check(
    mesh: &TriangleMesh,
    functional: Functional,
    params: &EnergyParams,
    config: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let grad = gradient(mesh, functional, params)?;
    let h = config.relative_step * mesh.bbox_diagonal();
    let gnorm = grad.norm();
    let mut report = GradCheckReport {
        functional,
        trials: config.trials,
        step: h,
        max_relative_error: 0.0,
        relative_errors: Vec::new(),
        analytic: Vec::new(),
        finite_difference: Vec::new(),
        tolerance: config.tolerance,
        pass: true,
    };
    for omega in random_directions(mesh.num_vertices(), config.trials, config.seed) {
        let plus = mesh_displaced(mesh, &omega, h);
        let minus = mesh_displaced(mesh, &omega, -h);
        let ep = energy_terms(&plus, functional, params)?;
        let em = energy_terms(&minus, functional, params)?;
        let fd = ep.iter().zip(&em).map(|(a, b)| a - b).sum::<f64>() / (2.0 * h);
        let an = grad.pair(&omega);
        let denom = an.abs().max(fd.abs()).max(1e-8 * gnorm).max(f64::MIN_POSITIVE);
        let err = (an - fd).abs() / denom;
        report.max_relative_error = report.max_relative_error.max(err);
        report.relative_errors.push(err);
        report.analytic.push(an);
        report.finite_difference.push(fd);
    }
    report.pass = report.max_relative_error <= config.tolerance;
    Ok(report)
}

pub fn mesh_displaced(mesh: &TriangleMesh, omega: &[Vec3], t: f64) -> TriangleMesh {
    TriangleMesh::new(mesh.vertices.iter().zip(omega).map(|(x, w)| x + w * t).collect(), mesh.faces.clone())
}

/// ∫ Div X dμ = −2∫ X·H⃗ with H⃗ = ½ΔΦ, the inward mean-curvature vector;
/// in the outward convention the right side is +2Σ A_i X_i·Hvec_i.
///
/// The left side uses the piecewise-linear tangential divergence on faces;
/// the right side the vertex mean-curvature vectors. The report also carries
/// the X = Φ − Φ(a₀) case, where both sides equal 2·area.
pub fn divergence_identity_check(mesh: &TriangleMesh, x: &[Vec3], tolerance: f64) -> Result<IdentityReport> {
    let g = vertex_geometry(mesh)?;
    let lhs_face = |field: &dyn Fn(usize) -> Vec3| -> f64 {
        (0..mesh.num_faces())
            .map(|f| {
                let face = mesh.faces[f];
                let p = mesh.corners(f);
                let n2 = (p[1] - p[0]).cross(&(p[2] - p[0]));
                let nhat = n2.normalize();
                // A_f ∇φ_c = ½ n̂ × (opposite edge)
                (0..3)
                    .map(|c| {
                        let e = p[(c + 2) % 3] - p[(c + 1) % 3];
                        field(face[c]).dot(&(nhat.cross(&e) * 0.5))
                    })
                    .sum::<f64>()
            })
            .sum()
    };
    let rhs_vertex = |field: &dyn Fn(usize) -> Vec3| -> f64 {
        (0..g.len()).map(|i| 2.0 * g.area[i] * field(i).dot(&g.hvec[i])).sum()
    };
    let lhs = lhs_face(&|i| x[i]);
    let rhs = rhs_vertex(&|i| x[i]);
    let scale = (0..g.len()).map(|i| g.area[i] * x[i].norm() * g.hvec[i].norm()).sum::<f64>().max(1e-300);
    let mut report = IdentityReport::new("divergence_identity", lhs, rhs, scale, tolerance);
    let a0 = mesh.vertices[0];
    let simon_lhs = lhs_face(&|i| mesh.vertices[i] - a0);
    let simon_rhs = rhs_vertex(&|i| mesh.vertices[i] - a0);
    report.extra.push(("position_field_lhs".into(), simon_lhs));
    report.extra.push(("position_field_rhs".into(), simon_rhs));
    report.extra.push(("two_area".into(), 2.0 * crate::geometry::total_area(mesh)));
    Ok(report)
}
