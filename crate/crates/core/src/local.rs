//! Per-face kernels evaluated with plain floats or dual numbers.

use crate::dual::{add3, cross3, dot3, mul3, sub3, Real, V3};

/// Quantities one triangle contributes to its three corners.
#[derive(Clone, Copy, Debug)]
pub struct FaceLocal<T> {
    pub area: T,
    /// Half the unnormalized face normal (the area vector).
    pub area_vector: V3<T>,
    /// Mixed-Voronoi area assigned to each corner.
    pub corner_area: [T; 3],
    /// Gradient of the face area with respect to each corner
    /// (the corner's share of the cotan Laplacian of the immersion).
    pub corner_lvec: [V3<T>; 3],
}

pub fn face_local<T: Real>(p: [V3<T>; 3]) -> FaceLocal<T> {
    let n = cross3(sub3(p[1], p[0]), sub3(p[2], p[0]));
    let twice_area = dot3(n, n).sqrt();
    let area = twice_area.scale(0.5);
    let area_vector = mul3(T::cst(0.5), n);

    // corner c with edges to the next (j) and previous (k) corners
    let mut cot = [T::cst(0.0); 3];
    let mut dots = [0.0; 3];
    for c in 0..3 {
        let (j, k) = ((c + 1) % 3, (c + 2) % 3);
        let d = dot3(sub3(p[j], p[c]), sub3(p[k], p[c]));
        dots[c] = d.value();
        cot[c] = d / twice_area;
    }
    let obtuse = (0..3).find(|&c| dots[c] < 0.0);

    let mut corner_area = [T::cst(0.0); 3];
    let mut corner_lvec = [[T::cst(0.0); 3]; 3];
    for c in 0..3 {
        let (j, k) = ((c + 1) % 3, (c + 2) % 3);
        let eij = sub3(p[c], p[j]);
        let eik = sub3(p[c], p[k]);
        corner_lvec[c] = mul3(T::cst(0.5), add3(mul3(cot[k], eij), mul3(cot[j], eik)));
        corner_area[c] = match obtuse {
            None => (cot[k] * dot3(eij, eij) + cot[j] * dot3(eik, eik)).scale(0.125),
            Some(o) if o == c => area.scale(0.5),
            Some(_) => area.scale(0.25),
        };
    }
    FaceLocal { area, area_vector, corner_area, corner_lvec }
}

/// Signed volume of the tetrahedron (0, a, b, c).
pub fn tet_volume<T: Real>(p: [V3<T>; 3]) -> T {
    dot3(p[0], cross3(p[1], p[2])).scale(1.0 / 6.0)
}

/// Flux of the position field through the face: (1/3)(a+b+c)·(area vector).
pub fn face_flux<T: Real>(p: [V3<T>; 3]) -> T {
    let n = cross3(sub3(p[1], p[0]), sub3(p[2], p[0]));
    let centroid = mul3(T::cst(1.0 / 3.0), add3(add3(p[0], p[1]), p[2]));
    dot3(centroid, n).scale(0.5)
}
