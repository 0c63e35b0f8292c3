//! The one-parameter family of round spheres of radius r and its critical
//! radius for the general energy.

use std::f64::consts::PI;

use crate::energy::EnergyParams;
use crate::error::{Error, Result};

/// General energy of the round sphere of radius r (flux convention):
/// 4π(1 − c0 r)² + 4πα r² + 4πρ r³.
pub fn sphere_energy(params: &EnergyParams, r: f64) -> f64 {
    let EnergyParams { c0, alpha, rho } = *params;
    4.0 * PI * ((1.0 - c0 * r).powi(2) + alpha * r * r + rho * r.powi(3))
}

pub fn sphere_energy_derivative(params: &EnergyParams, r: f64) -> f64 {
    let EnergyParams { c0, alpha, rho } = *params;
    4.0 * PI * (-2.0 * c0 * (1.0 - c0 * r) + 2.0 * alpha * r + 3.0 * rho * r * r)
}

/// Radius at which the sphere family is critical, found by bisection on
/// dE/dr. When c0 = α = ρ = 0 every radius is critical and 1 is returned.
pub fn critical_radius(params: &EnergyParams) -> Result<f64> {
    params.validate()?;
    if params.c0 == 0.0 && params.alpha == 0.0 && params.rho == 0.0 {
        return Ok(1.0);
    }
    // dE/dr(0) = −8πc0 and dE/dr is increasing on r > 0
    if params.c0 <= 0.0 {
        return Err(Error::Domain(format!(
            "no critical sphere for c0 = {}, alpha = {}, rho = {}",
            params.c0, params.alpha, params.rho
        )));
    }
    let d = |r: f64| sphere_energy_derivative(params, r);
    let (mut lo, mut hi) = (0.0, 1.0);
    while d(hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn willmore_sphere_energy_is_4pi_for_every_radius() {
        let p = EnergyParams::default();
        assert!((sphere_energy(&p, 0.3) - 4.0 * PI).abs() < 1e-12);
        assert_eq!(critical_radius(&p).unwrap(), 1.0);
    }

    #[test]
    fn no_critical_radius_without_positive_c0() {
        assert!(critical_radius(&EnergyParams::new(-1.0, 1.0, 0.0)).is_err());
        assert!(critical_radius(&EnergyParams::new(-1.0, 0.0, 0.0)).is_err());
        assert!((critical_radius(&EnergyParams::new(2.0, 0.0, 0.0)).unwrap() - 0.5).abs() < 1e-14);
    }
}
