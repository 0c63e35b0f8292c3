use helfrich::conservation::*;
use helfrich::sphere_family::{critical_radius, sphere_energy_derivative};
use helfrich::{EnergyParams, Error};

fn params(c0: f64, alpha: f64, rho: f64) -> EnergyParams {
    EnergyParams { c0, alpha, rho }
}

fn half_disk_l2(grid: &Grid, f: impl Fn(usize) -> f64) -> f64 {
    let s: f64 = (0..grid.len()).filter(|&k| grid.radius_sq(k) <= 0.25 + 1e-12).map(|k| f(k).powi(2)).sum();
    (s * grid.h * grid.h).sqrt()
}

/// Plain five-point Laplacian at an interior node.
fn lap(grid: &Grid, u: &[f64], k: usize) -> f64 {
    let m = grid.m;
    (u[k + m] + u[k - m] + u[k + 1] + u[k - 1] - 4.0 * u[k]) / (grid.h * grid.h)
}

#[test]
fn catalog_patches_are_conformal() {
    let p = params(1.0, 1.0, 0.0);
    for patch in [Patch::critical_cap(&p).unwrap(), Patch::Catenoid { neck: 0.7 }, Patch::Plane] {
        let chart = build_chart(&patch, 65).unwrap();
        assert!(chart.conformality_defect <= 1e-12, "{}: {}", patch.label(), chart.conformality_defect);
        assert!(chart.conformal_factor.iter().all(|l| l.is_finite()));
    }
}

#[test]
fn chart_lambda_and_curvature_match_the_sphere() {
    let r = 1.7;
    let chart = build_chart(&Patch::SphereCap { radius: r, scale: 0.5 }, 33).unwrap();
    let g = &chart.grid;
    for k in 0..g.len() {
        let (x1, x2) = g.node(k);
        let q = 1.0 + 0.25 * (x1 * x1 + x2 * x2);
        // |∂Φ| = r·2s/q for the scaled inverse stereographic map
        assert!((chart.conformal_factor[k] - (r / q).ln()).abs() < 1e-12);
        assert!((chart.phi[k].norm() - r).abs() < 1e-12);
        assert!((chart.mean_curvature[k] - 1.0 / r).abs() < 1e-15);
    }
}

#[test]
fn resolution_and_patch_preconditions() {
    assert!(matches!(build_chart(&Patch::Plane, 16), Err(Error::InvalidParameter(_))));
    assert!(build_chart(&Patch::Plane, MIN_RESOLUTION).is_ok());
    assert!(build_chart(&Patch::SphereCap { radius: -1.0, scale: 0.5 }, 65).is_err());
    assert!(build_chart(&Patch::Catenoid { neck: f64::NAN }, 65).is_err());
    assert!(Patch::critical_cap(&params(0.0, 1.0, 0.0)).is_err());
}

#[test]
fn grad_perp_sign_convention() {
    let chart = build_chart(&Patch::Plane, 33).unwrap();
    let g = &chart.grid;
    let x1: Vec<f64> = (0..g.len()).map(|k| g.node(k).0).collect();
    let x2: Vec<f64> = (0..g.len()).map(|k| g.node(k).1).collect();
    let (a1, a2) = grad_perp(g, &x1);
    let (b1, b2) = grad_perp(g, &x2);
    for k in (0..g.len()).filter(|&k| g.radius_sq(k) <= 1.0) {
        assert!(a1[k].abs() < 1e-12 && (a2[k] - 1.0).abs() < 1e-12);
        assert!((b1[k] + 1.0).abs() < 1e-12 && b2[k].abs() < 1e-12);
    }
}

#[test]
fn dirichlet_solve_is_self_consistent() {
    let chart = build_chart(&Patch::Plane, 49).unwrap();
    let g = &chart.grid;
    let f: Vec<f64> = (0..g.len()).map(|k| {
        let (x, y) = g.node(k);
        x.exp() * (3.0 * y).cos()
    }).collect();
    let (u, stats) = solve_dirichlet(g, &f).unwrap();
    assert!(stats.relative_residual <= 1e-12);
    let scale = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..g.len() {
        if g.radius_sq(k) < 1.0 - 1e-12 {
            assert!((lap(g, &u, k) - f[k]).abs() <= 1e-8 * scale, "node {k}");
        } else {
            assert_eq!(u[k], 0.0);
        }
    }
    assert!(solve_dirichlet(g, &f[1..]).is_err());
}

#[test]
fn flat_plane_has_vanishing_system() {
    let zero = params(0.0, 0.0, 0.0);
    let chart = build_chart(&Patch::Plane, 65).unwrap();
    let pot = solve_potentials(&chart, &zero).unwrap();
    assert!(pot.v.iter().chain(&pot.x).all(|v| v.norm() <= 1e-12));
    assert!(pot.y.iter().all(|y| y.abs() <= 1e-12));
    let rep = check_conservation_residuals(&chart, &pot, &zero).unwrap();
    for r in rep.residuals.as_array() {
        assert!(r <= 1e-12, "{:?}", rep.residuals);
    }
}

#[test]
fn critical_caps_converge_at_second_order() {
    for p in [params(1.0, 1.0, 0.0), params(0.5, 1.0, 0.5)] {
        let patch = Patch::critical_cap(&p).unwrap();
        let study = refinement_study(&patch, &p, &[65, 129]).unwrap();
        assert!(study.all_converge(1.5), "{:?}", study.orders);
        let (coarse, fine) = (&study.reports[0], &study.reports[1]);
        assert!(coarse.residuals.phi / fine.residuals.phi >= 3.0);
        assert!(coarse.gradient_residuals.l / fine.gradient_residuals.l >= 3.0);
        assert!(study.l_order >= 1.5);
        assert!(fine.max_solver_residual <= 1e-12);
    }
}

#[test]
fn off_critical_caps_stagnate() {
    for p in [params(1.0, 1.0, 0.0), params(0.5, 1.0, 0.5)] {
        let patch = Patch::off_critical_cap(&p, 1.1).unwrap();
        let Patch::SphereCap { radius, .. } = patch else { unreachable!() };
        // the sphere of this radius is not critical in the radial family
        let r_star = critical_radius(&p).unwrap();
        assert!((radius - 1.1 * r_star).abs() < 1e-12);
        assert!(sphere_energy_derivative(&p, radius).abs() > 1e-2);
        let study = refinement_study(&patch, &p, &[65, 129]).unwrap();
        assert!(study.some_stagnates(0.5), "{:?}", study.orders);
        assert!(study.reports[1].residuals.y > 1e-2);
    }
}

#[test]
fn constant_r_injection_leaves_only_the_laplacian_of_s() {
    let p = params(1.0, 1.0, 0.0);
    let chart = build_chart(&Patch::off_critical_cap(&p, 1.1).unwrap(), 65).unwrap();
    let mut pot = solve_potentials(&chart, &p).unwrap();
    pot.r.iter_mut().for_each(|r| *r = helfrich::Vec3::new(0.3, -1.0, 2.0));
    let rep = check_conservation_residuals(&chart, &pot, &p).unwrap();
    let g = &chart.grid;
    let expected = half_disk_l2(g, |k| lap(g, &pot.s, k));
    assert!(expected > 0.0);
    assert!((rep.residuals.s - expected).abs() <= 1e-12 * expected, "{} vs {expected}", rep.residuals.s);
}

#[test]
fn residuals_are_gauge_invariant() {
    let p = params(0.5, 1.0, 0.5);
    let chart = build_chart(&Patch::critical_cap(&p).unwrap(), 65).unwrap();
    let pot = solve_potentials(&chart, &p).unwrap();
    let base = check_conservation_residuals(&chart, &pot, &p).unwrap();
    let mut shifted = pot.clone();
    let c = helfrich::Vec3::new(5.0, -2.0, 0.25);
    shifted.l.iter_mut().for_each(|v| *v += c);
    shifted.r.iter_mut().for_each(|v| *v -= c * 3.0);
    shifted.s.iter_mut().for_each(|v| *v += 7.5);
    let rep = check_conservation_residuals(&chart, &shifted, &p).unwrap();
    for (a, b) in base.residuals.as_array().iter().zip(rep.residuals.as_array()) {
        // constants cancel exactly in the stencils up to round-off of order |c|·ε/h²
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn potentials_have_zero_mean_gauge() {
    let p = params(1.0, 1.0, 0.0);
    let chart = build_chart(&Patch::critical_cap(&p).unwrap(), 65).unwrap();
    let pot = solve_potentials(&chart, &p).unwrap();
    let g = &chart.grid;
    let inside: Vec<usize> = (0..g.len()).filter(|&k| g.radius_sq(k) <= 1.0 + 1e-12).collect();
    let mean_s = inside.iter().map(|&k| pot.s[k]).sum::<f64>() / inside.len() as f64;
    assert!(mean_s.abs() < 1e-10);
    for c in 0..3 {
        let mean_l = inside.iter().map(|&k| pot.l[k][c]).sum::<f64>() / inside.len() as f64;
        assert!(mean_l.abs() < 1e-10);
    }
}

#[test]
fn mismatched_potentials_are_rejected() {
    let p = params(1.0, 1.0, 0.0);
    let coarse = build_chart(&Patch::critical_cap(&p).unwrap(), 33).unwrap();
    let fine = build_chart(&Patch::critical_cap(&p).unwrap(), 65).unwrap();
    let pot = solve_potentials(&coarse, &p).unwrap();
    assert!(matches!(check_conservation_residuals(&fine, &pot, &p), Err(Error::InvalidParameter(_))));
    assert!(refinement_study(&Patch::Plane, &p, &[65]).is_err());
}

#[test]
fn fitted_order_recovers_power_laws() {
    let h = [0.1, 0.05, 0.025];
    let y: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
    assert!((fitted_order(&h, &y) - 2.0).abs() < 1e-12);
    assert!(fitted_order(&h, &[0.0, 0.0, 0.0]).is_infinite());
    assert!(fitted_order(&h, &[1.0, 1.0, 1.0]).abs() < 1e-12);
}

#[test]
fn report_round_trips_through_json() {
    let p = params(1.0, 1.0, 0.0);
    let study = refinement_study(&Patch::critical_cap(&p).unwrap(), &p, &[33, 65]).unwrap();
    let text = serde_json::to_string(&study).unwrap();
    let back: RefinementStudy = serde_json::from_str(&text).unwrap();
    assert_eq!(back.orders, study.orders);
    assert_eq!(back.reports[1].residuals, study.reports[1].residuals);
}
