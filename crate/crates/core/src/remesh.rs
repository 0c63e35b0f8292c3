//! Mesh maintenance used between flow steps: intrinsic Delaunay edge flips
//! and tangential smoothing. Neither changes the connectivity class.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::vertex_geometry;
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MaintenanceStats {
    pub flips: usize,
    pub smoothed_vertices: usize,
}

fn cot_at(apex: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    let (u, v) = (a - apex, b - apex);
    u.dot(&v) / u.cross(&v).norm()
}

/// Flips every edge whose opposite angles sum to more than π, sweeping in
/// index order until no flip applies or `max_passes` is reached. A flip is
/// skipped when the new edge already exists or would fold the surface.
pub fn delaunay_flips(mesh: &mut TriangleMesh, max_passes: usize) -> usize {
    let mut total = 0;
    for _ in 0..max_passes {
        let mut flips = 0;
        let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (f, face) in mesh.faces.iter().enumerate() {
            for c in 0..3 {
                let (a, b) = (face[c], face[(c + 1) % 3]);
                edge_faces.entry((a.min(b), a.max(b))).or_default().push(f);
            }
        }
        let mut edges: Vec<(usize, usize)> = edge_faces.keys().copied().collect();
        edges.sort_unstable();
        let mut touched = vec![false; mesh.num_faces()];
        for (a, b) in edges {
            let fs = &edge_faces[&(a, b)];
            if fs.len() != 2 || touched[fs[0]] || touched[fs[1]] {
                continue;
            }
            // f1 traverses a → b, f2 traverses b → a
            let (f1, f2, a, b) = if has_directed(&mesh.faces[fs[0]], a, b) {
                (fs[0], fs[1], a, b)
            } else {
                (fs[0], fs[1], b, a)
            };
            let c = opposite(&mesh.faces[f1], a, b);
            let d = opposite(&mesh.faces[f2], a, b);
            if c == d || edge_faces.contains_key(&(c.min(d), c.max(d))) {
                continue;
            }
            let x = &mesh.vertices;
            if cot_at(&x[c], &x[a], &x[b]) + cot_at(&x[d], &x[a], &x[b]) >= 0.0 {
                continue;
            }
            let old = (x[b] - x[a]).cross(&(x[c] - x[a])) + (x[a] - x[b]).cross(&(x[d] - x[b]));
            let n1 = (x[d] - x[a]).cross(&(x[c] - x[a]));
            let n2 = (x[b] - x[d]).cross(&(x[c] - x[d]));
            if n1.dot(&old) <= 0.0 || n2.dot(&old) <= 0.0 || n1.dot(&n2) <= 0.0 {
                continue;
            }
            mesh.faces[f1] = [a, d, c];
            mesh.faces[f2] = [d, b, c];
            touched[f1] = true;
            touched[f2] = true;
            flips += 1;
        }
        total += flips;
        if flips == 0 {
            break;
        }
    }
    total
}

fn has_directed(face: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|c| face[c] == a && face[(c + 1) % 3] == b)
}

fn opposite(face: &[usize; 3], a: usize, b: usize) -> usize {
    *face.iter().find(|&&v| v != a && v != b).expect("triangle has a third vertex")
}

/// Moves each vertex a fraction `weight` toward its neighbour average,
/// restricted to the tangent plane.
pub fn tangential_smoothing(mesh: &mut TriangleMesh, weight: f64) -> Result<usize> {
    if weight <= 0.0 {
        return Ok(0);
    }
    let g = vertex_geometry(mesh)?;
    let neighbors = mesh.vertex_neighbors();
    let moved: Vec<Vec3> = (0..mesh.num_vertices())
        .map(|i| {
            let x = mesh.vertices[i];
            let avg = neighbors[i].iter().fold(Vec3::zeros(), |acc, &j| acc + mesh.vertices[j]) / neighbors[i].len() as f64;
            let d = avg - x;
            let n = g.normal[i];
            x + (d - n * n.dot(&d)) * weight
        })
        .collect();
    mesh.vertices = moved;
    Ok(mesh.num_vertices())
}

pub fn maintain(mesh: &mut TriangleMesh, smoothing_weight: f64) -> Result<MaintenanceStats> {
    let flips = delaunay_flips(mesh, 10);
    let smoothed_vertices = tangential_smoothing(mesh, smoothing_weight)?;
    Ok(MaintenanceStats { flips, smoothed_vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_ellipsoid;
    use crate::topology::validate_topology;

    #[test]
    fn flips_keep_a_valid_sphere() {
        let mut mesh = gen_ellipsoid(3, 3.0, 1.0, 0.6).unwrap();
        let flips = delaunay_flips(&mut mesh, 10);
        assert!(flips > 0);
        assert!(validate_topology(&mesh).pass);
        assert_eq!(delaunay_flips(&mut mesh, 10), 0);
    }

    #[test]
    fn smoothing_preserves_topology() {
        let mut mesh = gen_ellipsoid(2, 2.0, 1.0, 1.0).unwrap();
        maintain(&mut mesh, 0.2).unwrap();
        assert!(validate_topology(&mesh).pass);
    }
}
