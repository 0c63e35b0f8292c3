//! Discrete differential geometry on closed triangle meshes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::local::{face_flux, face_local, tet_volume};
use crate::mesh::{TriangleMesh, Vec3, DEGENERACY_TOLERANCE};

/// Per-vertex geometric quantities.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexGeometry {
    /// Mixed-Voronoi area weights A_i.
    pub area: Vec<f64>,
    /// Unit normals (area-weighted face normals, normalized).
    pub normal: Vec<Vec3>,
    /// Mean-curvature vectors Hvec_i = ∇_i Area / (2 A_i).
    pub hvec: Vec<Vec3>,
    /// Scalar mean curvature H_i = n_i · Hvec_i (positive on outward spheres).
    pub mean_curvature: Vec<f64>,
    /// Angle defects κ_i = 2π − Σ incident angles.
    pub angle_defect: Vec<f64>,
    /// Area gradient per vertex, ∇_i Area = 2 A_i Hvec_i.
    pub lvec: Vec<Vec3>,
    /// Unnormalized area-weighted normal sums.
    pub area_vector: Vec<Vec3>,
}

impl VertexGeometry {
    pub fn len(&self) -> usize {
        self.area.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area.is_empty()
    }

    /// Pointwise Gauss curvature estimate κ_i / A_i.
    pub fn gauss_curvature(&self, i: usize) -> f64 {
        self.angle_defect[i] / self.area[i]
    }

    /// Pointwise |II|² = 4H² − 2K.
    pub fn second_fundamental_sq(&self, i: usize) -> f64 {
        4.0 * self.mean_curvature[i].powi(2) - 2.0 * self.gauss_curvature(i)
    }
}

fn corners_of(mesh: &TriangleMesh, f: usize) -> [[f64; 3]; 3] {
    let [a, b, c] = mesh.corners(f);
    [[a.x, a.y, a.z], [b.x, b.y, b.z], [c.x, c.y, c.z]]
}

fn to_vec(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn check_faces(mesh: &TriangleMesh) -> Result<()> {
    let n = mesh.num_vertices();
    if let Some(f) = mesh.faces.iter().position(|f| f.iter().any(|&v| v >= n)) {
        return Err(Error::InvalidMesh(format!("face {f} references a missing vertex")));
    }
    let tol = DEGENERACY_TOLERANCE * mesh.bbox_diagonal().powi(2);
    for f in 0..mesh.num_faces() {
        let area = mesh.face_area(f);
        if !(area >= tol) {
            return Err(Error::DegenerateGeometry(format!("face {f} has area {area:.3e}")));
        }
    }
    Ok(())
}

pub fn vertex_geometry(mesh: &TriangleMesh) -> Result<VertexGeometry> {
    check_faces(mesh)?;
    let nv = mesh.num_vertices();
    let mut area = vec![0.0; nv];
    let mut lvec = vec![Vec3::zeros(); nv];
    let mut area_vector = vec![Vec3::zeros(); nv];
    let mut angle_sum = vec![0.0; nv];
    for (f, face) in mesh.faces.iter().enumerate() {
        let p = corners_of(mesh, f);
        let local = face_local(p);
        let m = to_vec(local.area_vector);
        for c in 0..3 {
            let v = face[c];
            area[v] += local.corner_area[c];
            lvec[v] += to_vec(local.corner_lvec[c]);
            area_vector[v] += m;
            let (j, k) = ((c + 1) % 3, (c + 2) % 3);
            let u = to_vec(p[j]) - to_vec(p[c]);
            let w = to_vec(p[k]) - to_vec(p[c]);
            angle_sum[v] += u.cross(&w).norm().atan2(u.dot(&w));
        }
    }
    let mut normal = Vec::with_capacity(nv);
    let mut hvec = Vec::with_capacity(nv);
    let mut mean_curvature = Vec::with_capacity(nv);
    for i in 0..nv {
        if !(area[i] > 0.0) {
            return Err(Error::DegenerateGeometry(format!("vertex {i} has no incident area")));
        }
        let n = area_vector[i].normalize();
        let h = lvec[i] / (2.0 * area[i]);
        mean_curvature.push(n.dot(&h));
        normal.push(n);
        hvec.push(h);
    }
    let angle_defect = angle_sum.iter().map(|s| 2.0 * PI - s).collect();
    Ok(VertexGeometry { area, normal, hvec, mean_curvature, angle_defect, lvec, area_vector })
}

pub fn total_area(mesh: &TriangleMesh) -> f64 {
    (0..mesh.num_faces()).map(|f| mesh.face_area(f)).sum()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FluxVolume {
    /// ∫ n·Φ dμ computed face by face.
    pub raw_flux: f64,
    /// Enclosed volume, raw_flux / 3.
    pub volume: f64,
}

pub fn enclosed_volume(mesh: &TriangleMesh) -> FluxVolume {
    let raw_flux: f64 = (0..mesh.num_faces()).map(|f| face_flux(corners_of(mesh, f))).sum();
    FluxVolume { raw_flux, volume: raw_flux / 3.0 }
}

/// Signed tetrahedron-sum volume (equal to raw_flux/3 up to rounding).
pub fn signed_volume(mesh: &TriangleMesh) -> f64 {
    (0..mesh.num_faces()).map(|f| tet_volume(corners_of(mesh, f))).sum()
}

/// Exact maximum pairwise vertex distance.
///
/// Vertices are scanned in decreasing distance from the centroid; a pair
/// (i, j) can only beat the current best if r_i + r_j exceeds it.
pub fn diameter(mesh: &TriangleMesh) -> f64 {
    let c = mesh.centroid();
    let mut order: Vec<(f64, usize)> = mesh.vertices.iter().enumerate().map(|(i, v)| ((v - c).norm(), i)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best_sq = 0.0f64;
    for (a, &(ra, i)) in order.iter().enumerate() {
        if 2.0 * ra <= best_sq.sqrt() {
            break;
        }
        let pi = mesh.vertices[i];
        for &(rb, j) in &order[a + 1..] {
            if ra + rb <= best_sq.sqrt() {
                break;
            }
            best_sq = best_sq.max((pi - mesh.vertices[j]).norm_squared());
        }
    }
    best_sq.sqrt()
}

/// Two sides of an inequality lhs ≤ rhs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InequalityReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let slack = rhs - lhs;
        Self { name: name.to_string(), lhs, rhs, slack, tolerance, pass: slack >= -tolerance }
    }
}

/// Two evaluations of one identity.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    pub relative_gap: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<(String, f64)>,
}

impl IdentityReport {
    pub fn new(name: &str, lhs: f64, rhs: f64, scale: f64, tolerance: f64) -> Self {
        let gap = (lhs - rhs).abs();
        let relative_gap = gap / scale.abs().max(f64::MIN_POSITIVE);
        Self {
            name: name.to_string(),
            lhs,
            rhs,
            gap,
            relative_gap,
            tolerance,
            pass: relative_gap <= tolerance,
            extra: Vec::new(),
        }
    }
}

/// √area ≤ diam · √(∫H²).
pub fn check_diameter_bound(mesh: &TriangleMesh) -> Result<InequalityReport> {
    let g = vertex_geometry(mesh)?;
    let willmore: f64 = (0..g.len()).map(|i| g.area[i] * g.mean_curvature[i].powi(2)).sum();
    let lhs = total_area(mesh).sqrt();
    let rhs = diameter(mesh) * willmore.sqrt();
    Ok(InequalityReport::new("diameter_bound", lhs, rhs, 1e-12 * lhs.max(1.0)))
}

/// ∫|II|² = 4∫H² − 2∫K: the combination Σ A_i 4H_i² − 2Σ κ_i against the
/// principal-curvature sum Σ A_i (k₁² + k₂²), with k₁,₂ recovered from
/// (H_i, κ_i / A_i). They differ only where the discrete H² < K.
pub fn second_fundamental_identity(mesh: &TriangleMesh, tolerance: f64) -> Result<IdentityReport> {
    let g = vertex_geometry(mesh)?;
    let mut combination = 0.0;
    let mut principal = 0.0;
    let mut clamped = 0usize;
    for i in 0..g.len() {
        let h = g.mean_curvature[i];
        let k = g.gauss_curvature(i);
        combination += 4.0 * g.area[i] * h * h - 2.0 * g.angle_defect[i];
        let disc = h * h - k;
        if disc < 0.0 {
            clamped += 1;
        }
        let s = disc.max(0.0).sqrt();
        principal += g.area[i] * ((h + s).powi(2) + (h - s).powi(2));
    }
    let mut report = IdentityReport::new("second_fundamental_identity", combination, principal, combination, tolerance);
    report.extra.push(("clamped_vertices".into(), clamped as f64));
    Ok(report)
}
