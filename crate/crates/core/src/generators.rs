//! Synthetic meshes: icospheres, ellipsoids, the two-sphere neck family and a
//! few fixtures used by the verification suite.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

/// Default cap on icosphere subdivision (V = 10·4^8 + 2 ≈ 6.6e5).
pub const DEFAULT_MAX_LEVEL: u32 = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshKind {
    Icosphere,
    Ellipsoid,
    TwoSphereNeck,
}

/// Parameters selecting one member of a generator family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFamilyParams {
    pub kind: MeshKind,
    #[serde(default = "default_level")]
    pub level: u32,
    #[serde(default = "default_axes")]
    pub axes: [f64; 3],
    #[serde(default = "default_k")]
    pub k: u32,
    #[serde(default = "default_neck_samples")]
    pub neck_samples: usize,
    #[serde(default = "default_max_level")]
    pub max_level: u32,
}

fn default_level() -> u32 {
    3
}
fn default_axes() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}
fn default_k() -> u32 {
    2
}
fn default_neck_samples() -> usize {
    64
}
fn default_max_level() -> u32 {
    DEFAULT_MAX_LEVEL
}

impl Default for MeshFamilyParams {
    fn default() -> Self {
        Self {
            kind: MeshKind::Icosphere,
            level: default_level(),
            axes: default_axes(),
            k: default_k(),
            neck_samples: default_neck_samples(),
            max_level: default_max_level(),
        }
    }
}

impl MeshFamilyParams {
    pub fn validate(&self) -> Result<()> {
        if self.level > self.max_level {
            return Err(Error::Resource(format!(
                "subdivision level {} exceeds the configured maximum {}",
                self.level, self.max_level
            )));
        }
        if self.axes.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidParameter("ellipsoid semi-axes must be positive".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidParameter("neck parameter k must be at least 1".into()));
        }
        if self.neck_samples < 8 {
            return Err(Error::InvalidParameter("neck_samples must be at least 8".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<TriangleMesh> {
        self.validate()?;
        match self.kind {
            MeshKind::Icosphere => gen_icosphere_capped(self.level, self.max_level),
            MeshKind::Ellipsoid => {
                let [a, b, c] = self.axes;
                gen_icosphere_capped(self.level, self.max_level).map(|m| ellipsoid_from_sphere(&m, a, b, c))
            }
            MeshKind::TwoSphereNeck => gen_two_sphere_neck(self.k, self.neck_samples),
        }
    }
}

/// Icosahedron subdivided `level` times with vertices on the unit sphere.
pub fn gen_icosphere(level: u32) -> Result<TriangleMesh> {
    gen_icosphere_capped(level, DEFAULT_MAX_LEVEL)
}

pub fn gen_icosphere_capped(level: u32, max_level: u32) -> Result<TriangleMesh> {
    if level > max_level {
        return Err(Error::Resource(format!(
            "subdivision level {level} exceeds the configured maximum {max_level}"
        )));
    }
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                vertices.push((vertices[a] + vertices[b]).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(4 * faces.len());
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(TriangleMesh::new(vertices, faces))
}

/// Axis-aligned ellipsoid with semi-axes (a, b, c) built on an icosphere.
pub fn gen_ellipsoid(level: u32, a: f64, b: f64, c: f64) -> Result<TriangleMesh> {
    if !(a > 0.0 && b > 0.0 && c > 0.0) {
        return Err(Error::InvalidParameter("ellipsoid semi-axes must be positive".into()));
    }
    Ok(ellipsoid_from_sphere(&gen_icosphere(level)?, a, b, c))
}

fn ellipsoid_from_sphere(sphere: &TriangleMesh, a: f64, b: f64, c: f64) -> TriangleMesh {
    sphere.map_vertices(|v| Vec3::new(a * v.x, b * v.y, c * v.z))
}

/// Displaces every vertex by an independent uniform draw from the cube
/// [−amplitude, amplitude]³, reproducibly for a given seed.
pub fn perturb_vertices(mesh: &TriangleMesh, amplitude: f64, seed: u64) -> Result<TriangleMesh> {
    if !(amplitude.is_finite() && amplitude >= 0.0) {
        return Err(Error::InvalidParameter(format!("perturbation amplitude {amplitude} must be non-negative")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = mesh.clone();
    if amplitude > 0.0 {
        for v in &mut out.vertices {
            *v += Vec3::new(
                rng.random_range(-amplitude..amplitude),
                rng.random_range(-amplitude..amplitude),
                rng.random_range(-amplitude..amplitude),
            );
        }
    }
    Ok(out)
}

/// Closed surface of revolution about the z-axis. `profile` runs from the
/// south pole (r = 0) to the north pole (r = 0); interior points must have
/// r > 0. Every ring has `segments` vertices, staggered by half a step.
pub fn surface_of_revolution(profile: &[(f64, f64)], segments: usize) -> Result<TriangleMesh> {
    let interior = profile.len().saturating_sub(2);
    surface_of_revolution_rings(profile, &vec![segments; interior])
}

/// Surface of revolution with `counts[j]` vertices on the j-th interior
/// ring. Neighbouring rings are stitched by merging their vertices in
/// angular order, so the counts may differ from ring to ring.
pub fn surface_of_revolution_rings(profile: &[(f64, f64)], counts: &[usize]) -> Result<TriangleMesh> {
    if profile.len() < 3 || counts.len() != profile.len() - 2 || counts.iter().any(|&c| c < 3) {
        return Err(Error::InvalidParameter(
            "profile needs at least 3 points and every ring at least 3 segments".into(),
        ));
    }
    let rings = &profile[1..profile.len() - 1];
    if rings.iter().any(|&(r, _)| !(r > 0.0)) {
        return Err(Error::DegenerateGeometry("interior profile radius must be positive".into()));
    }
    let mut vertices = Vec::with_capacity(2 + counts.iter().sum::<usize>());
    let mut start = Vec::with_capacity(rings.len());
    let mut offset = Vec::with_capacity(rings.len());
    vertices.push(Vec3::new(0.0, 0.0, profile[0].1));
    for (j, &(r, z)) in rings.iter().enumerate() {
        let m = counts[j];
        // stagger equal-count neighbours by half a step
        let shift = if j > 0 && counts[j - 1] == m && offset[j - 1] == 0.0 { 0.5 } else { 0.0 };
        start.push(vertices.len());
        offset.push(shift);
        for l in 0..m {
            let phi = 2.0 * PI * (l as f64 + shift) / m as f64;
            vertices.push(Vec3::new(r * phi.cos(), r * phi.sin(), z));
        }
    }
    let north = vertices.len();
    vertices.push(Vec3::new(0.0, 0.0, profile[profile.len() - 1].1));

    let ring = |j: usize, l: usize| start[j] + (l % counts[j]);
    let angle = |j: usize, l: usize| (l as f64 + offset[j]) / counts[j] as f64;
    let mut faces = Vec::new();
    for l in 0..counts[0] {
        faces.push([0, ring(0, l + 1), ring(0, l)]);
    }
    for j in 0..rings.len() - 1 {
        let (na, nb) = (counts[j], counts[j + 1]);
        let (mut a, mut b) = (0, 0);
        while a < na || b < nb {
            let advance_lower = b == nb || (a < na && angle(j, a + 1) <= angle(j + 1, b + 1));
            if advance_lower {
                faces.push([ring(j, a), ring(j, a + 1), ring(j + 1, b)]);
                a += 1;
            } else {
                faces.push([ring(j, a), ring(j + 1, b + 1), ring(j + 1, b)]);
                b += 1;
            }
        }
    }
    let last = rings.len() - 1;
    for l in 0..counts[last] {
        faces.push([ring(last, l), ring(last, l + 1), north]);
    }
    let mesh = TriangleMesh::new(vertices, faces);
    mesh.check_nondegenerate()?;
    Ok(mesh)
}

/// Geometry of the two-sphere neck construction for a given k.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NeckProfile {
    pub k: u32,
    /// Radius of the lower (large) sphere, 1 + 1/k.
    pub radius_large: f64,
    /// Radius of the upper (small) sphere, 1 − 1/k.
    pub radius_small: f64,
    /// Catenoid waist radius.
    pub waist: f64,
    /// Centre heights of the two spheres on the z-axis.
    pub center_large: f64,
    pub center_small: f64,
    /// Polar angles (from the neck side) where each sphere meets the catenoid.
    pub junction_angle_large: f64,
    pub junction_angle_small: f64,
    /// Catenoid extent in z.
    pub neck_z: (f64, f64),
}

impl NeckProfile {
    /// Side-by-side spheres of radii 1 ± 1/k glued tangentially (C¹) to a
    /// catenoid r(z) = w cosh(z/w) with waist w = 1/k.
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::DegenerateGeometry(format!(
                "k = {k} gives a small sphere of radius {}",
                1.0 - 1.0 / k.max(1) as f64
            )));
        }
        let kf = k as f64;
        let (ra, rb, w) = (1.0 + 1.0 / kf, 1.0 - 1.0 / kf, 1.0 / kf);
        let junction = |r: f64| {
            let s = (w / r).sqrt().min(1.0);
            let theta = s.asin();
            let u = (1.0 / s).acosh();
            (theta, u)
        };
        let (theta_a, u_a) = junction(ra);
        let (theta_b, u_b) = junction(rb);
        Ok(Self {
            k,
            radius_large: ra,
            radius_small: rb,
            waist: w,
            center_large: -(ra * theta_a.cos() + w * u_a),
            center_small: rb * theta_b.cos() + w * u_b,
            junction_angle_large: theta_a,
            junction_angle_small: theta_b,
            neck_z: (-w * u_a, w * u_b),
        })
    }

    /// Profile points from the south pole of the large sphere to the north
    /// pole of the small sphere, with spacing adapted to the local feature
    /// size (fine in the neck, coarse on the far hemispheres).
    pub fn sample(&self, segments: usize) -> Vec<(f64, f64)> {
        let (ra, rb, w) = (self.radius_large, self.radius_small, self.waist);
        let (ca, cb) = (self.center_large, self.center_small);
        let (za, zb) = self.neck_z;
        let psi_a_end = PI - self.junction_angle_large;
        let psi_b_start = self.junction_angle_small;
        let len_a = ra * psi_a_end;
        let len_b = rb * (PI - psi_b_start);
        let neck_len = |z: f64| w * (z / w).sinh();
        let len_n = neck_len(zb) - neck_len(za);

        let point = |s: f64| -> (f64, f64) {
            if s <= len_a {
                let psi = s / ra;
                (ra * psi.sin(), ca - ra * psi.cos())
            } else if s <= len_a + len_n {
                let target = neck_len(za) + (s - len_a);
                let z = w * (target / w).asinh();
                (w * (z / w).cosh(), z)
            } else {
                let psi = psi_b_start + (s - len_a - len_n) / rb;
                (rb * psi.sin(), cb - rb * psi.cos())
            }
        };
        // local feature size: the ring radius near the neck, the sphere
        // radius on the far hemispheres
        let feature = |s: f64| -> f64 {
            if s <= len_a && s / ra < 0.5 * PI {
                ra
            } else if s > len_a + len_n && psi_b_start + (s - len_a - len_n) / rb > 0.5 * PI {
                rb
            } else {
                point(s).0
            }
        };
        let total = len_a + len_n + len_b;
        let angular = 2.0 * PI / segments as f64;
        let floor = 0.3 * w * angular;
        let ceiling = 0.5 * (ra + rb) * angular;
        let mut samples = vec![point(0.0)];
        let mut s = 0.0;
        loop {
            let step = (feature(s) * angular).clamp(floor, ceiling);
            s += step;
            if s >= total - 0.5 * floor {
                break;
            }
            samples.push(point(s));
        }
        samples.push(point(total));
        samples
    }

    /// Analytic area of the glued surface.
    pub fn analytic_area(&self) -> f64 {
        let (ra, rb, w) = (self.radius_large, self.radius_small, self.waist);
        let cap = |r: f64, theta: f64| 2.0 * PI * r * r * (1.0 - theta.cos());
        let tube = |z: f64| PI * w * w * (z / w + 0.5 * (2.0 * z / w).sinh());
        let (za, zb) = self.neck_z;
        4.0 * PI * (ra * ra + rb * rb) - cap(ra, self.junction_angle_large) - cap(rb, self.junction_angle_small)
            + tube(zb)
            - tube(za)
    }
}

/// The bubbling family: spheres of radii 1 + 1/k and 1 − 1/k joined by a
/// catenoidal neck. `neck_samples` is the number of vertices per ring.
pub fn gen_two_sphere_neck(k: u32, neck_samples: usize) -> Result<TriangleMesh> {
    if neck_samples < 8 {
        return Err(Error::InvalidParameter("neck_samples must be at least 8".into()));
    }
    let profile = NeckProfile::new(k)?;
    let points = profile.sample(neck_samples);
    surface_of_revolution_rings(&points, &ring_counts(&points, neck_samples))
}

/// Vertices per interior ring so that circumferential edges match the local
/// profile spacing, capped at `max_segments`.
pub fn ring_counts(profile: &[(f64, f64)], max_segments: usize) -> Vec<usize> {
    let dist = |a: (f64, f64), b: (f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
    (1..profile.len() - 1)
        .map(|j| {
            let spacing = 0.5 * (dist(profile[j - 1], profile[j]) + dist(profile[j], profile[j + 1]));
            let n = (2.0 * PI * profile[j].0 / spacing).round() as usize;
            n.clamp(6, max_segments.max(6))
        })
        .collect()
}

/// Regular tetrahedron inscribed in the unit sphere.
pub fn gen_tetrahedron() -> TriangleMesh {
    let s = 1.0 / 3f64.sqrt();
    let v = vec![
        Vec3::new(s, s, s),
        Vec3::new(s, -s, -s),
        Vec3::new(-s, s, -s),
        Vec3::new(-s, -s, s),
    ];
    TriangleMesh::new(v, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

/// Cube [-1, 1]³ whose faces are split into an n×n grid of right triangles.
/// Interior vertices of each face lie on flat patches.
pub fn gen_cube(n: usize) -> Result<TriangleMesh> {
    if n < 1 {
        return Err(Error::InvalidParameter("cube subdivision must be at least 1".into()));
    }
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let n_i = n as i64;
    let mut vid = |p: [i64; 3], vertices: &mut Vec<Vec3>| -> usize {
        *index.entry(p).or_insert_with(|| {
            let h = 2.0 / n as f64;
            vertices.push(Vec3::new(p[0] as f64 * h - 1.0, p[1] as f64 * h - 1.0, p[2] as f64 * h - 1.0));
            vertices.len() - 1
        })
    };
    // (normal axis, side, u axis, v axis) with u × v along the outward normal.
    let sides = [(0, n_i, 1, 2), (0, 0, 2, 1), (1, n_i, 2, 0), (1, 0, 0, 2), (2, n_i, 0, 1), (2, 0, 1, 0)];
    for &(axis, side, u, v) in &sides {
        let at = |i: i64, j: i64| {
            let mut p = [0i64; 3];
            p[axis] = side;
            p[u] = i;
            p[v] = j;
            p
        };
        for i in 0..n_i {
            for j in 0..n_i {
                let p00 = vid(at(i, j), &mut vertices);
                let p10 = vid(at(i + 1, j), &mut vertices);
                let p11 = vid(at(i + 1, j + 1), &mut vertices);
                let p01 = vid(at(i, j + 1), &mut vertices);
                faces.push([p00, p10, p11]);
                faces.push([p00, p11, p01]);
            }
        }
    }
    Ok(TriangleMesh::new(vertices, faces))
}

/// Genus-0 surface of revolution whose profile r = sin t,
/// z = −cos t + 1.2 sin 2t crosses itself, so the surface self-intersects
/// along a circle at z = 0.
pub fn gen_figure_eight(segments: usize) -> Result<TriangleMesh> {
    let samples = segments.max(8);
    let profile: Vec<(f64, f64)> = (0..=samples)
        .map(|i| {
            let t = PI * i as f64 / samples as f64;
            let r = if i == 0 || i == samples { 0.0 } else { t.sin() };
            (r, -t.cos() + 1.2 * (2.0 * t).sin())
        })
        .collect();
    surface_of_revolution(&profile, segments.max(8))
}
