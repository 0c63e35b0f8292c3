//! Indexed triangle meshes.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Relative area below which a triangle counts as degenerate
/// (scaled by the squared bounding-box diagonal).
pub const DEGENERACY_TOLERANCE: f64 = 1e-14;

/// A closed triangle mesh stored as an indexed face set.
///
/// Faces are oriented counter-clockwise when seen from outside, so the face
/// normal `(b - a) x (c - a)` points outward.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Self {
        Self { vertices, faces }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn corners(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Twice the area vector of face `f`.
    pub fn face_normal_scaled(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_normal_scaled(f).norm()
    }

    /// Sorted list of undirected edges.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges: Vec<[usize; 2]> = self
            .faces
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|[i, j]| if i < j { [i, j] } else { [j, i] })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Sorted one-ring neighbour lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.faces {
            nb[a].extend([b, c]);
            nb[b].extend([c, a]);
            nb[c].extend([a, b]);
        }
        for list in &mut nb {
            list.sort_unstable();
            list.dedup();
        }
        nb
    }

    /// Faces incident to each vertex, in face order.
    pub fn vertex_faces(&self) -> Vec<Vec<usize>> {
        let mut vf = vec![Vec::new(); self.vertices.len()];
        for (f, face) in self.faces.iter().enumerate() {
            for &v in face {
                vf[v].push(f);
            }
        }
        vf
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn centroid(&self) -> Vec3 {
        let n = self.vertices.len().max(1) as f64;
        self.vertices.iter().fold(Vec3::zeros(), |acc, v| acc + v) / n
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        self.map_vertices(|v| v + t)
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map_vertices(|v| v * s)
    }

    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vec3) -> Self {
        self.map_vertices(|v| rotation * v + translation)
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Flattened coordinates `[x0, y0, z0, x1, ...]`.
    pub fn coordinates(&self) -> Vec<f64> {
        self.vertices.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    pub fn with_coordinates(&self, x: &[f64]) -> Self {
        assert_eq!(x.len(), 3 * self.vertices.len());
        Self {
            vertices: x.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Checks index bounds and rejects triangles below the degeneracy tolerance.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (f, face) in self.faces.iter().enumerate() {
            if face.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!("face {f} references a missing vertex")));
            }
            if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
                return Err(Error::DegenerateGeometry(format!("face {f} repeats a vertex")));
            }
        }
        let tol = DEGENERACY_TOLERANCE * self.bbox_diagonal().powi(2);
        for f in 0..self.faces.len() {
            let area = self.face_area(f);
            if !(area >= tol) {
                return Err(Error::DegenerateGeometry(format!(
                    "face {f} has area {area:.3e} below tolerance {tol:.3e}"
                )));
            }
        }
        Ok(())
    }

    /// Concatenates two meshes into one vertex/face set.
    pub fn merged(&self, other: &TriangleMesh) -> Self {
        let offset = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|&[a, b, c]| [a + offset, b + offset, c + offset]));
        Self { vertices, faces }
    }
}
