use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::mesh::{TriangleMesh, DEGENERACY_TOLERANCE};

/// Combinatorial and orientation checks for a closed genus-0 surface.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TopologyReport {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler_characteristic: i64,
    pub components: usize,
    pub boundary_edges: usize,
    pub nonmanifold_edges: usize,
    pub nonmanifold_vertices: usize,
    pub isolated_vertices: usize,
    pub orientation_consistent: bool,
    /// Signed enclosed volume is positive (faces wind outward).
    pub outward: bool,
    pub min_face_area: f64,
    pub degenerate_faces: usize,
    pub closed: bool,
    pub pass: bool,
}

pub fn validate_topology(mesh: &TriangleMesh) -> TopologyReport {
    let nv = mesh.num_vertices();
    let valid_indices = mesh.faces.iter().all(|f| f.iter().all(|&v| v < nv));

    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    let mut undirected: HashMap<(usize, usize), usize> = HashMap::new();
    if valid_indices {
        for &[a, b, c] in &mesh.faces {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                *directed.entry((i, j)).or_default() += 1;
                *undirected.entry((i.min(j), i.max(j))).or_default() += 1;
            }
        }
    }
    let boundary_edges = undirected.values().filter(|&&c| c == 1).count();
    let nonmanifold_edges = undirected.values().filter(|&&c| c > 2).count();
    let orientation_consistent = valid_indices && directed.values().all(|&c| c == 1);

    let mut used = vec![false; nv];
    for f in &mesh.faces {
        for &v in f {
            if v < nv {
                used[v] = true;
            }
        }
    }
    let isolated_vertices = used.iter().filter(|u| !**u).count();
    let nonmanifold_vertices = if valid_indices { count_nonmanifold_vertices(mesh) } else { nv };
    let components = if valid_indices { count_components(mesh) } else { 0 };

    let tol = DEGENERACY_TOLERANCE * mesh.bbox_diagonal().powi(2);
    let mut min_face_area = f64::INFINITY;
    let mut degenerate_faces = 0;
    let mut volume = 0.0;
    if valid_indices {
        for f in 0..mesh.num_faces() {
            let area = mesh.face_area(f);
            min_face_area = min_face_area.min(area);
            if !(area >= tol) {
                degenerate_faces += 1;
            }
            let [a, b, c] = mesh.corners(f);
            volume += a.dot(&b.cross(&c)) / 6.0;
        }
    }

    let euler_characteristic = nv as i64 - undirected.len() as i64 + mesh.num_faces() as i64;
    let closed = valid_indices && boundary_edges == 0 && nonmanifold_edges == 0 && !mesh.faces.is_empty();
    let pass = closed
        && orientation_consistent
        && nonmanifold_vertices == 0
        && isolated_vertices == 0
        && euler_characteristic == 2
        && degenerate_faces == 0;
    TopologyReport {
        vertices: nv,
        edges: undirected.len(),
        faces: mesh.num_faces(),
        euler_characteristic,
        components,
        boundary_edges,
        nonmanifold_edges,
        nonmanifold_vertices,
        isolated_vertices,
        orientation_consistent,
        outward: volume > 0.0,
        min_face_area,
        degenerate_faces,
        closed,
        pass,
    }
}

/// A vertex is manifold when its incident faces form a single fan.
fn count_nonmanifold_vertices(mesh: &TriangleMesh) -> usize {
    let vf = mesh.vertex_faces();
    let mut bad = 0;
    for (v, faces) in vf.iter().enumerate() {
        if faces.is_empty() {
            continue;
        }
        // link edges (next, prev) around v
        let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
        for &f in faces {
            let face = mesh.faces[f];
            let k = face.iter().position(|&x| x == v).unwrap();
            let (a, b) = (face[(k + 1) % 3], face[(k + 2) % 3]);
            next.entry(a).or_default().push(b);
            next.entry(b).or_default().push(a);
        }
        if next.values().any(|n| n.len() != 2) {
            bad += 1;
            continue;
        }
        let start = *next.keys().min().unwrap();
        let (mut prev, mut cur, mut steps) = (start, next[&start][0], 1);
        while cur != start && steps <= next.len() {
            let n = &next[&cur];
            let nxt = if n[0] == prev { n[1] } else { n[0] };
            prev = cur;
            cur = nxt;
            steps += 1;
        }
        if steps != next.len() {
            bad += 1;
        }
    }
    bad
}

fn count_components(mesh: &TriangleMesh) -> usize {
    let n = mesh.num_vertices();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &[a, b, c] in &mesh.faces {
        for (i, j) in [(a, b), (b, c)] {
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[ri] = rj;
            }
        }
    }
    let mut roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    roots.len()
}
