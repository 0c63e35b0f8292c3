//! Triangle-triangle self-intersection detection with an AABB hierarchy.

use serde::{Deserialize, Serialize};

use crate::mesh::{TriangleMesh, Vec3};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntersectionReport {
    /// Number of intersecting pairs of triangles that share no vertex.
    pub count: usize,
    /// Lowest-index intersecting pair, if any.
    pub witness: Option<(usize, usize)>,
    pub embedded: bool,
}

#[derive(Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn of(points: &[Vec3]) -> Self {
        let mut b = Aabb { lo: points[0], hi: points[0] };
        for p in &points[1..] {
            b.lo = b.lo.inf(p);
            b.hi = b.hi.sup(p);
        }
        b
    }

    fn union(&self, o: &Aabb) -> Aabb {
        Aabb { lo: self.lo.inf(&o.lo), hi: self.hi.sup(&o.hi) }
    }

    fn overlaps(&self, o: &Aabb) -> bool {
        (0..3).all(|k| self.lo[k] <= o.hi[k] && o.lo[k] <= self.hi[k])
    }
}

enum Node {
    Leaf { bounds: Aabb, items: Vec<usize> },
    Split { bounds: Aabb, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Split { bounds, .. } => bounds,
        }
    }

    fn build(mut items: Vec<usize>, boxes: &[Aabb], centers: &[Vec3]) -> Node {
        let bounds = items.iter().skip(1).fold(boxes[items[0]], |acc, &i| acc.union(&boxes[i]));
        if items.len() <= 4 {
            return Node::Leaf { bounds, items };
        }
        let extent = bounds.hi - bounds.lo;
        let axis = if extent.x >= extent.y && extent.x >= extent.z {
            0
        } else if extent.y >= extent.z {
            1
        } else {
            2
        };
        items.sort_by(|&a, &b| centers[a][axis].total_cmp(&centers[b][axis]).then(a.cmp(&b)));
        let right = items.split_off(items.len() / 2);
        Node::Split {
            bounds,
            left: Box::new(Node::build(items, boxes, centers)),
            right: Box::new(Node::build(right, boxes, centers)),
        }
    }

    fn query(&self, b: &Aabb, out: &mut Vec<usize>) {
        if !self.bounds().overlaps(b) {
            return;
        }
        match self {
            Node::Leaf { items, .. } => out.extend(items.iter().copied()),
            Node::Split { left, right, .. } => {
                left.query(b, out);
                right.query(b, out);
            }
        }
    }
}

fn orient(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a))
}

/// Proper crossing of segment pq through the interior of triangle t.
fn segment_crosses(p: &Vec3, q: &Vec3, t: &[Vec3; 3]) -> bool {
    let sp = orient(&t[0], &t[1], &t[2], p);
    let sq = orient(&t[0], &t[1], &t[2], q);
    if sp * sq >= 0.0 {
        return false;
    }
    let s0 = orient(p, q, &t[0], &t[1]);
    let s1 = orient(p, q, &t[1], &t[2]);
    let s2 = orient(p, q, &t[2], &t[0]);
    (s0 > 0.0 && s1 > 0.0 && s2 > 0.0) || (s0 < 0.0 && s1 < 0.0 && s2 < 0.0)
}

/// Non-coplanar triangle intersection: some edge of one crosses the other.
pub fn triangles_intersect(a: &[Vec3; 3], b: &[Vec3; 3]) -> bool {
    (0..3).any(|k| segment_crosses(&a[k], &a[(k + 1) % 3], b))
        || (0..3).any(|k| segment_crosses(&b[k], &b[(k + 1) % 3], a))
}

pub fn self_intersection_check(mesh: &TriangleMesh) -> IntersectionReport {
    let nf = mesh.num_faces();
    if nf == 0 {
        return IntersectionReport { count: 0, witness: None, embedded: true };
    }
    let tris: Vec<[Vec3; 3]> = (0..nf).map(|f| mesh.corners(f)).collect();
    let boxes: Vec<Aabb> = tris.iter().map(|t| Aabb::of(t)).collect();
    let centers: Vec<Vec3> = tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
    let root = Node::build((0..nf).collect(), &boxes, &centers);

    let mut count = 0;
    let mut witness = None;
    let mut candidates = Vec::new();
    for i in 0..nf {
        candidates.clear();
        root.query(&boxes[i], &mut candidates);
        candidates.sort_unstable();
        let fi = mesh.faces[i];
        for &j in candidates.iter().filter(|&&j| j > i) {
            let fj = mesh.faces[j];
            if fi.iter().any(|v| fj.contains(v)) {
                continue;
            }
            if triangles_intersect(&tris[i], &tris[j]) {
                count += 1;
                if witness.is_none() {
                    witness = Some((i, j));
                }
            }
        }
    }
    IntersectionReport { count, witness, embedded: count == 0 }
}
