use std::f64::consts::PI;

use helfrich::elres::el_residual;
use helfrich::energy::*;
use helfrich::generators::{gen_ellipsoid, gen_figure_eight, gen_icosphere, gen_two_sphere_neck};
use helfrich::sphere_family::{critical_radius, sphere_energy};
use helfrich::{energy, EnergyParams, Error};
use proptest::prelude::*;

#[test]
fn unit_sphere_energies() {
    let m = gen_icosphere(4).unwrap();
    let e = energy(&m, &EnergyParams::new(1.0, 0.0, 0.0)).unwrap();
    assert!(e.helfrich <= 0.05, "{}", e.helfrich);
    let w = energy(&m, &EnergyParams::willmore()).unwrap().willmore;
    assert!((w / (4.0 * PI) - 1.0).abs() <= 0.01);
    assert_eq!(e.willmore, w);
}

#[test]
fn general_equals_willmore_without_parameters() {
    for m in [gen_icosphere(2).unwrap(), gen_ellipsoid(3, 2.0, 1.0, 0.5).unwrap(), gen_two_sphere_neck(3, 32).unwrap()] {
        let e = energy(&m, &EnergyParams::default()).unwrap();
        assert_eq!(e.general, e.willmore);
        assert_eq!(e.helfrich, e.willmore);
    }
}

#[test]
fn general_energy_assembly() {
    let m = gen_ellipsoid(3, 1.5, 1.0, 0.8).unwrap();
    let p = EnergyParams::new(0.7, 0.3, 0.1);
    let e = energy(&m, &p).unwrap();
    assert!((e.general - (e.helfrich + 0.3 * e.area + 0.1 * e.raw_flux)).abs() <= 1e-12 * e.general);
    let g = energy_with_convention(&m, &p, VolumeConvention::Geometric).unwrap();
    assert!((g.general - e.general).abs() <= 1e-12 * e.general);
}

#[test]
fn sphere_family_matches_discrete_energy() {
    let p = EnergyParams::new(0.5, 1.0, 0.5);
    for r in [0.5, 1.0, 2.0] {
        let e = energy(&gen_icosphere(5).unwrap().scaled(r), &p).unwrap();
        let exact = sphere_energy(&p, r);
        assert!((e.general / exact - 1.0).abs() <= 5e-3, "r = {r}: {} vs {exact}", e.general);
    }
}

#[test]
fn parameter_validation() {
    let m = gen_icosphere(1).unwrap();
    for bad in [EnergyParams::new(0.0, -1.0, 0.0), EnergyParams::new(0.0, 0.0, -0.5), EnergyParams::new(f64::NAN, 0.0, 0.0)] {
        assert!(matches!(energy(&m, &bad), Err(Error::InvalidParameter(_))));
    }
    assert!(energy(&m, &EnergyParams::new(-3.0, 0.0, 0.0)).is_ok());
    assert!(serde_json::from_str::<EnergyParams>(r#"{"c0": 1, "beta": 2}"#).is_err());
    let p: EnergyParams = serde_json::from_str(r#"{"c0": 1}"#).unwrap();
    assert_eq!(p, EnergyParams::new(1.0, 0.0, 0.0));
}

#[test]
fn willmore_helfrich_bound_examples() {
    let m = gen_icosphere(4).unwrap();
    let a0 = 4.0 * PI;
    let r = check_willmore_helfrich_bound(&m, 1.0, a0).unwrap();
    assert!(r.pass);
    assert!((r.rhs / (8.0 * PI) - 1.0).abs() < 0.01);
    let r = check_willmore_helfrich_bound(&m, 0.0, a0).unwrap();
    assert!(r.pass && (r.rhs / r.lhs - 2.0).abs() < 1e-12);
    let big = m.scaled(2.0);
    assert!(matches!(check_willmore_helfrich_bound(&big, 1.0, a0), Err(Error::InvalidParameter(_))));
}

#[test]
fn epsilon_threshold() {
    let eps = epsilon_embeddedness(4.0 * PI, 4.0 * PI / 3.0, 4.0 * PI).unwrap();
    assert!((eps - (2f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
    assert!((eps - 0.20711).abs() < 1e-5);
    let upper = (2f64.sqrt() - 1.0) * PI.sqrt() / (4.0 * PI).sqrt();
    assert!((eps - upper).abs() < 1e-15);
    let near = epsilon_embeddedness(4.0 * PI, 4.0 * PI / 3.0, 8.0 * PI - 1e-9).unwrap();
    assert!(near > 0.0 && near < 1e-9);
    let quarter = epsilon_embeddedness(16.0 * PI, 1.0, 4.0 * PI).unwrap();
    let base = epsilon_embeddedness(4.0 * PI, 1.0, 4.0 * PI).unwrap();
    assert!((quarter - 0.5 * base).abs() < 1e-15);
    assert!(matches!(epsilon_embeddedness(4.0 * PI, 5.0, 4.0 * PI), Err(Error::ConstraintViolation(_))));
    assert!(matches!(epsilon_embeddedness(4.0 * PI, 1.0, 8.0 * PI), Err(Error::Domain(_))));
    assert!(matches!(epsilon_embeddedness(4.0 * PI, 1.0, 3.0), Err(Error::Domain(_))));
}

#[test]
fn isoperimetric_feasibility() {
    assert!(isoperimetric_feasible(4.0 * PI, 4.0 * PI / 3.0));
    assert!(!isoperimetric_feasible(4.0 * PI, 4.0 * PI / 3.0 * 1.001));
    assert!(!isoperimetric_feasible(-1.0, 1.0));
}

#[test]
fn li_yau_reports() {
    let r = check_li_yau_embeddedness(&gen_icosphere(3).unwrap(), 1e-9).unwrap();
    assert_eq!(r.status, EmbeddingStatus::Consistent);
    assert!(r.margin > 0.0 && r.intersections.embedded);
    let r = check_li_yau_embeddedness(&gen_two_sphere_neck(6, 64).unwrap(), 1e-9).unwrap();
    // two spheres carry 4π each; no embeddedness claim near 8π
    assert!((r.willmore / (8.0 * PI) - 1.0).abs() < 0.15, "{}", r.willmore);
    assert!(r.intersections.embedded);
    let r = check_li_yau_embeddedness(&gen_figure_eight(32).unwrap(), 1e-9).unwrap();
    assert!(r.willmore > 8.0 * PI && !r.intersections.embedded);
    assert_eq!(r.status, EmbeddingStatus::Consistent);
}

#[test]
fn willmore_lower_bound_with_mesh_deficit() {
    let sphere = energy(&gen_icosphere(3).unwrap(), &EnergyParams::willmore()).unwrap().willmore;
    let delta = (1.0 - sphere / (4.0 * PI)).max(0.0);
    for m in [gen_ellipsoid(3, 2.0, 1.0, 1.0).unwrap(), gen_ellipsoid(3, 1.0, 0.6, 0.3).unwrap(), gen_icosphere(3).unwrap()] {
        assert!(check_willmore_lower_bound(&m, delta).unwrap().pass);
    }
}

#[test]
fn el_residual_refines_on_critical_spheres() {
    for p in [EnergyParams::default(), EnergyParams::new(1.0, 1.0, 0.0), EnergyParams::new(0.5, 1.0, 0.5)] {
        let r = critical_radius(&p).unwrap();
        let norm = |level| el_residual(&gen_icosphere(level).unwrap().scaled(r), &p).unwrap().norm;
        let (coarse, fine) = (norm(3), norm(5));
        assert!(coarse / fine >= 2.0, "{p:?}: {coarse} -> {fine}");
    }
}

#[test]
fn el_residual_plateaus_off_critical() {
    for p in [EnergyParams::new(1.0, 1.0, 0.0), EnergyParams::new(0.5, 1.0, 0.5)] {
        let r = 1.1 * critical_radius(&p).unwrap();
        let norm = |level| el_residual(&gen_icosphere(level).unwrap().scaled(r), &p).unwrap().norm;
        let (coarse, fine) = (norm(3), norm(5));
        assert!(fine >= 0.5 * coarse, "{p:?}: {coarse} -> {fine}");
    }
}

#[test]
fn el_residual_is_translation_equivariant() {
    let m = gen_ellipsoid(3, 1.5, 1.0, 0.8).unwrap();
    let p = EnergyParams::new(0.7, 0.3, 0.0);
    let a = el_residual(&m, &p).unwrap();
    let b = el_residual(&m.translated(&helfrich::Vec3::new(3.0, -1.0, 2.0)), &p).unwrap();
    for (x, y) in a.field.iter().zip(&b.field) {
        assert!((x - y).norm() <= 1e-8 * (1.0 + x.norm()));
    }
}

fn arb_ellipsoid() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.4f64..2.5, 0.4f64..2.5, 0.4f64..2.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn breakdown_identity(axes in arb_ellipsoid(), c0 in -2.0f64..2.0) {
        let m = gen_ellipsoid(2, axes.0, axes.1, axes.2).unwrap();
        let e = energy(&m, &EnergyParams::new(c0, 0.0, 0.0)).unwrap();
        prop_assert!(e.expansion_defect() <= 1e-10);
    }

    #[test]
    fn willmore_is_scale_invariant(axes in arb_ellipsoid(), lambda in prop::sample::select(vec![0.5, 3.0])) {
        let m = gen_ellipsoid(2, axes.0, axes.1, axes.2).unwrap();
        let w0 = energy(&m, &EnergyParams::willmore()).unwrap().willmore;
        let w1 = energy(&m.scaled(lambda), &EnergyParams::willmore()).unwrap().willmore;
        prop_assert!((w1 - w0).abs() <= 1e-10 * w0);
    }

    #[test]
    fn helfrich_scale_covariance(axes in arb_ellipsoid(), c0 in -2.0f64..2.0, lambda in 0.3f64..4.0) {
        let m = gen_ellipsoid(2, axes.0, axes.1, axes.2).unwrap();
        let h0 = energy(&m, &EnergyParams::new(c0, 0.0, 0.0)).unwrap().helfrich;
        let h1 = energy(&m.scaled(lambda), &EnergyParams::new(c0 / lambda, 0.0, 0.0)).unwrap().helfrich;
        prop_assert!((h1 - h0).abs() <= 1e-10 * h0.max(1e-3));
    }

    #[test]
    fn willmore_helfrich_bound_on_random_ellipsoids(axes in arb_ellipsoid(), c0 in prop::sample::select(vec![-1.0, 0.5, 2.0])) {
        let m = gen_ellipsoid(2, axes.0, axes.1, axes.2).unwrap();
        let a0 = helfrich::geometry::total_area(&m);
        prop_assert!(check_willmore_helfrich_bound(&m, c0, a0).unwrap().pass);
    }
}
