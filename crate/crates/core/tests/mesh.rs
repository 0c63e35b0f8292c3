use std::f64::consts::PI;

use helfrich::generators::*;
use helfrich::geometry::{enclosed_volume, total_area};
use helfrich::io::{load_mesh, parse_obj, parse_ply, save_mesh, write_obj};
use helfrich::topology::validate_topology;
use helfrich::{Error, TriangleMesh, Vec3};

#[test]
fn icosphere_counts() {
    for (level, v, f) in [(0, 12, 20), (1, 42, 80), (2, 162, 320), (3, 642, 1280)] {
        let m = gen_icosphere(level).unwrap();
        assert_eq!((m.num_vertices(), m.num_faces()), (v, f));
        assert_eq!(m.num_vertices(), 10 * 4usize.pow(level) + 2);
        let t = validate_topology(&m);
        assert!(t.pass && t.euler_characteristic == 2 && t.outward && t.orientation_consistent);
        assert!(m.vertices.iter().all(|p| (p.norm() - 1.0).abs() <= 1e-12));
    }
}

#[test]
fn icosphere_level_three_area() {
    let m = gen_icosphere(3).unwrap();
    // inscribed polyhedron: strictly below the sphere area
    let a = total_area(&m);
    assert!(a < 4.0 * PI && a > 4.0 * PI * 0.995, "{a}");
}

#[test]
fn level_cap_is_a_resource_error() {
    assert!(matches!(gen_icosphere_capped(5, 4), Err(Error::Resource(_))));
    let params = MeshFamilyParams { level: 20, ..Default::default() };
    assert!(matches!(params.generate(), Err(Error::Resource(_))));
}

#[test]
fn family_params_validate() {
    let bad_axes = MeshFamilyParams { kind: MeshKind::Ellipsoid, axes: [1.0, 0.0, 1.0], ..Default::default() };
    assert!(matches!(bad_axes.generate(), Err(Error::InvalidParameter(_))));
    let bad_k = MeshFamilyParams { kind: MeshKind::TwoSphereNeck, k: 0, ..Default::default() };
    assert!(bad_k.generate().is_err());
    let few = MeshFamilyParams { kind: MeshKind::TwoSphereNeck, neck_samples: 4, ..Default::default() };
    assert!(few.generate().is_err());
    let ell = MeshFamilyParams { kind: MeshKind::Ellipsoid, level: 2, axes: [2.0, 1.0, 0.5], ..Default::default() };
    let m = ell.generate().unwrap();
    let (lo, hi) = m.bounding_box();
    assert!(((hi - lo) - Vec3::new(4.0, 2.0, 1.0)).norm() < 1e-12);
    let parsed: MeshFamilyParams = serde_json::from_str(r#"{"kind": "two-sphere-neck", "k": 5}"#).unwrap();
    assert_eq!(parsed.k, 5);
    assert!(serde_json::from_str::<MeshFamilyParams>(r#"{"kind": "icosphere", "bogus": 1}"#).is_err());
}

#[test]
fn neck_family_is_a_closed_sphere() {
    for k in 2..=12 {
        let m = gen_two_sphere_neck(k, 64).unwrap();
        let t = validate_topology(&m);
        assert!(t.pass, "k = {k}: {t:?}");
        assert_eq!(t.euler_characteristic, 2);
    }
    assert!(gen_two_sphere_neck(1, 64).is_err());
}

#[test]
fn neck_area_and_volume_match_two_spheres() {
    let a = total_area(&gen_two_sphere_neck(2, 64).unwrap());
    let target = 4.0 * PI * 2.5;
    assert!((a - target).abs() <= 0.1 * target, "{a} vs {target}");
    let v = enclosed_volume(&gen_two_sphere_neck(10, 64).unwrap()).volume;
    let target = 4.0 * PI / 3.0 * (1.1f64.powi(3) + 0.9f64.powi(3));
    assert!((v - target).abs() <= 0.05 * target, "{v} vs {target}");
}

#[test]
fn neck_profile_glues_tangentially() {
    for k in [2, 5, 12] {
        let p = NeckProfile::new(k).unwrap();
        assert!((p.waist - 1.0 / k as f64).abs() < 1e-15);
        assert!((p.radius_large - (1.0 + 1.0 / k as f64)).abs() < 1e-15);
        assert!((p.radius_small - (1.0 - 1.0 / k as f64)).abs() < 1e-15);
        let prof = p.sample(64);
        assert!(prof.windows(2).all(|w| w[1].1 > w[0].1), "profile must be monotone in z");
        assert!(prof.iter().all(|&(r, _)| r >= -1e-12));
    }
}

#[test]
fn topology_failures() {
    let m = gen_icosphere(1).unwrap();
    let mut open = m.clone();
    open.faces.pop();
    let t = validate_topology(&open);
    assert!(!t.pass && t.boundary_edges == 3 && !t.closed);

    let pair = m.merged(&m.translated(&Vec3::new(5.0, 0.0, 0.0)));
    let t = validate_topology(&pair);
    assert_eq!(t.euler_characteristic, 4);
    assert_eq!(t.components, 2);
    assert!(!t.pass);

    let mut flipped = m.clone();
    flipped.faces[0].swap(1, 2);
    let t = validate_topology(&flipped);
    assert!(!t.orientation_consistent && !t.pass);

    let inside_out = TriangleMesh::new(m.vertices.clone(), m.faces.iter().map(|&[a, b, c]| [a, c, b]).collect());
    let t = validate_topology(&inside_out);
    // acceptance only asks for a closed orientable sphere; the winding is reported
    assert!(t.orientation_consistent && !t.outward && t.pass);

    let bad_index = TriangleMesh::new(m.vertices.clone(), vec![[0, 1, 999]]);
    assert!(!validate_topology(&bad_index).pass);
}

#[test]
fn degenerate_face_is_reported() {
    let mut m = gen_icosphere(1).unwrap();
    let [a, b, _] = m.faces[0];
    m.vertices[b] = m.vertices[a];
    let t = validate_topology(&m);
    assert!(t.degenerate_faces > 0 && !t.pass);
    assert!(m.check_nondegenerate().is_err());
}

#[test]
fn file_round_trips_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let m = gen_ellipsoid(2, 1.3, 0.7, 1.0 / 3.0).unwrap();
    for name in ["m.obj", "m.ply", "M.PLY"] {
        let path = dir.path().join(name);
        save_mesh(&m, &path).unwrap();
        let back = load_mesh(&path).unwrap();
        assert_eq!(back.faces, m.faces);
        for (p, q) in back.vertices.iter().zip(&m.vertices) {
            assert_eq!(p, q, "{name}");
        }
    }
    assert!(matches!(save_mesh(&m, dir.path().join("m.stl")), Err(Error::UnsupportedFormat(_))));
    assert!(load_mesh(dir.path().join("missing.obj")).is_err());
}

#[test]
fn obj_parsing() {
    let quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
    assert!(matches!(parse_obj(quad), Err(Error::UnsupportedFormat(_))));
    match parse_obj("v 0 0 0\nv 1 zero 0\n") {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    let tri = "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n";
    let m = parse_obj(tri).unwrap();
    assert_eq!(m.faces, vec![[0, 1, 2]]);
    assert!(parse_obj("v 0 0 0\nf 1 2 3\n").is_err());
    let text = write_obj(&gen_icosphere(0).unwrap());
    assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 20);
}

#[test]
fn ply_icosahedron() {
    let ico = gen_icosphere(0).unwrap();
    let mut text = String::from("ply\nformat ascii 1.0\nelement vertex 12\nproperty double x\nproperty double y\nproperty double z\nelement face 20\nproperty list uchar int vertex_indices\nend_header\n");
    for v in &ico.vertices {
        text += &format!("{} {} {}\n", v.x, v.y, v.z);
    }
    for f in &ico.faces {
        text += &format!("3 {} {} {}\n", f[0], f[1], f[2]);
    }
    let m = parse_ply(&text).unwrap();
    assert_eq!((m.num_vertices(), m.num_faces()), (12, 20));
    assert!(validate_topology(&m).pass);
    let quad = text.replacen("3 ", "4 ", 1);
    assert!(parse_ply(&quad).is_err());
    assert!(parse_ply("ply\nformat binary_little_endian 1.0\nend_header\n").is_err());
}

#[test]
fn fixtures_are_valid_surfaces() {
    for m in [gen_tetrahedron(), gen_cube(3).unwrap(), gen_figure_eight(32).unwrap()] {
        let t = validate_topology(&m);
        assert!(t.closed && t.orientation_consistent, "{t:?}");
    }
}

#[test]
fn perturbation_is_seeded_and_bounded() {
    let m = gen_icosphere(2).unwrap();
    let a = perturb_vertices(&m, 0.01, 7).unwrap();
    let b = perturb_vertices(&m, 0.01, 7).unwrap();
    let c = perturb_vertices(&m, 0.01, 8).unwrap();
    assert_eq!(a.vertices, b.vertices);
    assert_ne!(a.vertices, c.vertices);
    for (p, q) in a.vertices.iter().zip(&m.vertices) {
        let d = p - q;
        assert!(d.iter().all(|x| x.abs() <= 0.01));
    }
    assert!(perturb_vertices(&m, -1.0, 0).is_err());
    assert!(perturb_vertices(&m, f64::NAN, 0).is_err());
}
