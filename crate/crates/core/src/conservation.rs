//! Conservation-law form of the Euler-Lagrange system on flat disk charts.
//!
//! A catalog patch supplies a conformal immersion Φ of the closed unit disk
//! together with its normal and mean curvature. On a uniform grid over
//! [−1, 1]² (padded with ghost layers so centred differences stay valid up to
//! the disk boundary) we solve the Poisson problems for the potentials
//! V, X, Y, L, R, S and evaluate the four second-order equations they satisfy
//! when Φ is critical. Residuals are measured on the half-radius subdisk.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::mesh::Vec3;
use crate::sphere_family::critical_radius;

/// Smallest admissible grid resolution.
pub const MIN_RESOLUTION: usize = 33;
const PAD: usize = 4;
const CG_TOLERANCE: f64 = 1e-12;

/// Conformal immersions of the unit disk with analytic derivatives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Patch {
    /// Inverse stereographic projection x ↦ r·σ(s·x), covering a cap of the
    /// sphere of radius r around its north pole.
    SphereCap { radius: f64, scale: f64 },
    /// (a cosh u cos v, a cosh u sin v, a u) with (u, v) = (x1, x2).
    Catenoid { neck: f64 },
    Plane,
}

/// Analytic data of a patch at one point.
#[derive(Clone, Copy, Debug)]
pub struct PatchSample {
    pub phi: Vec3,
    pub d1: Vec3,
    pub d2: Vec3,
    /// (∂₁Φ × ∂₂Φ) / |∂₁Φ × ∂₂Φ|.
    pub normal: Vec3,
    /// H with ΔΦ = 2e^{2λ} H n.
    pub mean_curvature: f64,
}

impl Patch {
    /// Sphere cap at the critical radius of the sphere family for `params`.
    pub fn critical_cap(params: &EnergyParams) -> Result<Self> {
        Ok(Patch::SphereCap { radius: critical_radius(params)?, scale: 0.5 })
    }

    /// Sphere cap at `factor` times the critical radius.
    pub fn off_critical_cap(params: &EnergyParams, factor: f64) -> Result<Self> {
        Ok(Patch::SphereCap { radius: factor * critical_radius(params)?, scale: 0.5 })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Patch::SphereCap { radius, scale } => radius > 0.0 && scale > 0.0 && radius.is_finite() && scale.is_finite(),
            Patch::Catenoid { neck } => neck > 0.0 && neck.is_finite(),
            Patch::Plane => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid patch {self:?}")))
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Patch::SphereCap { radius, scale } => format!("sphere cap (r = {radius}, s = {scale})"),
            Patch::Catenoid { neck } => format!("catenoid (a = {neck})"),
            Patch::Plane => "plane".to_string(),
        }
    }

    pub fn sample(&self, x1: f64, x2: f64) -> PatchSample {
        match *self {
            Patch::SphereCap { radius: r, scale: s } => {
                let rr = x1 * x1 + x2 * x2;
                let q = 1.0 + s * s * rr;
                let q2 = q * q;
                let phi = Vec3::new(2.0 * s * x1 / q, -2.0 * s * x2 / q, (1.0 - s * s * rr) / q) * r;
                let d1 = Vec3::new(
                    2.0 * s * (q - 2.0 * s * s * x1 * x1) / q2,
                    4.0 * s.powi(3) * x1 * x2 / q2,
                    -4.0 * s * s * x1 / q2,
                ) * r;
                let d2 = Vec3::new(
                    -4.0 * s.powi(3) * x1 * x2 / q2,
                    -2.0 * s * (q - 2.0 * s * s * x2 * x2) / q2,
                    -4.0 * s * s * x2 / q2,
                ) * r;
                PatchSample { phi, d1, d2, normal: -phi / r, mean_curvature: 1.0 / r }
            }
            Patch::Catenoid { neck: a } => {
                let (ch, sh) = (x1.cosh(), x1.sinh());
                let (c, s) = (x2.cos(), x2.sin());
                PatchSample {
                    phi: Vec3::new(a * ch * c, a * ch * s, a * x1),
                    d1: Vec3::new(a * sh * c, a * sh * s, a),
                    d2: Vec3::new(-a * ch * s, a * ch * c, 0.0),
                    normal: Vec3::new(-c, -s, sh) / ch,
                    mean_curvature: 0.0,
                }
            }
            Patch::Plane => PatchSample {
                phi: Vec3::new(x1, x2, 0.0),
                d1: Vec3::x(),
                d2: Vec3::y(),
                normal: Vec3::z(),
                mean_curvature: 0.0,
            },
        }
    }
}

/// Uniform grid over [−1, 1]² with `PAD` ghost layers on each side.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Grid {
    /// Nodes per side of [−1, 1]².
    pub n: usize,
    /// Nodes per side including ghost layers.
    pub m: usize,
    pub h: f64,
}

impl Grid {
    fn new(n: usize) -> Self {
        Self { n, m: n + 2 * PAD, h: 2.0 / (n - 1) as f64 }
    }

    /// Coordinate of grid line `i` (ghost lines included).
    pub fn coord(&self, i: usize) -> f64 {
        -1.0 + self.h * (i as f64 - PAD as f64)
    }

    /// Chart coordinates of node `k`.
    pub fn node(&self, k: usize) -> (f64, f64) {
        (self.coord(k / self.m), self.coord(k % self.m))
    }

    pub fn radius_sq(&self, k: usize) -> f64 {
        let (x1, x2) = (self.coord(k / self.m), self.coord(k % self.m));
        x1 * x1 + x2 * x2
    }

    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiskChart {
    pub patch: Patch,
    pub grid: Grid,
    pub phi: Vec<Vec3>,
    pub normal: Vec<Vec3>,
    pub mean_curvature: Vec<f64>,
    /// λ = log|∂₁Φ|.
    pub conformal_factor: Vec<f64>,
    /// max over the closed disk of ||∂₁Φ|² − |∂₂Φ|²| + 2|∂₁Φ·∂₂Φ|, relative to |∂₁Φ|².
    pub conformality_defect: f64,
}

pub fn build_chart(patch: &Patch, n: usize) -> Result<DiskChart> {
    if n < MIN_RESOLUTION {
        return Err(Error::InvalidParameter(format!("chart resolution {n} is below the minimum {MIN_RESOLUTION}")));
    }
    patch.validate()?;
    let grid = Grid::new(n);
    let samples: Vec<PatchSample> = (0..grid.len())
        .into_par_iter()
        .map(|k| patch.sample(grid.coord(k / grid.m), grid.coord(k % grid.m)))
        .collect();
    let mut defect: f64 = 0.0;
    let mut conformal_factor = Vec::with_capacity(samples.len());
    for (k, s) in samples.iter().enumerate() {
        let e = s.d1.norm_squared();
        let lambda = 0.5 * e.ln();
        if grid.radius_sq(k) <= 1.0 + 1e-12 {
            if !lambda.is_finite() {
                return Err(Error::Domain(format!("{} has a branch point inside the chart", patch.label())));
            }
            defect = defect.max(((e - s.d2.norm_squared()).abs() + 2.0 * s.d1.dot(&s.d2).abs()) / e);
        }
        conformal_factor.push(lambda);
    }
    if defect > 1e-10 {
        return Err(Error::Domain(format!("{} is not conformal (defect {defect:.3e})", patch.label())));
    }
    Ok(DiskChart {
        patch: *patch,
        grid,
        phi: samples.iter().map(|s| s.phi).collect(),
        normal: samples.iter().map(|s| s.normal).collect(),
        mean_curvature: samples.iter().map(|s| s.mean_curvature).collect(),
        conformal_factor,
        conformality_defect: defect,
    })
}

/// Component-wise grid fields with centred differences (zero on the
/// outermost ghost layer).
trait Field: Copy + Send + Sync + Default + std::ops::Add<Output = Self> + std::ops::Sub<Output = Self> + std::ops::Mul<f64, Output = Self> {}
impl Field for f64 {}
impl Field for Vec3 {}

fn d1<T: Field>(g: &Grid, f: &[T]) -> Vec<T> {
    let m = g.m;
    (0..g.len())
        .map(|k| {
            let i = k / m;
            if i == 0 || i == m - 1 {
                T::default()
            } else {
                (f[k + m] - f[k - m]) * (0.5 / g.h)
            }
        })
        .collect()
}

fn d2<T: Field>(g: &Grid, f: &[T]) -> Vec<T> {
    let m = g.m;
    (0..g.len())
        .map(|k| {
            let j = k % m;
            if j == 0 || j == m - 1 {
                T::default()
            } else {
                (f[k + 1] - f[k - 1]) * (0.5 / g.h)
            }
        })
        .collect()
}

/// Five-point Laplacian (zero on the outermost ghost layer).
fn laplacian<T: Field>(g: &Grid, f: &[T]) -> Vec<T> {
    let m = g.m;
    (0..g.len())
        .map(|k| {
            let (i, j) = (k / m, k % m);
            if i == 0 || j == 0 || i == m - 1 || j == m - 1 {
                T::default()
            } else {
                (f[k + m] + f[k - m] + f[k + 1] + f[k - 1] - f[k] * 4.0) * (1.0 / (g.h * g.h))
            }
        })
        .collect()
}

fn zip_map<A: Copy, B: Copy, C>(a: &[A], b: &[B], f: impl Fn(A, B) -> C) -> Vec<C> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn to_components(f: &[Vec3]) -> [Vec<f64>; 3] {
    std::array::from_fn(|c| f.iter().map(|v| v[c]).collect())
}

fn from_components(c: &[Vec<f64>; 3]) -> Vec<Vec3> {
    (0..c[0].len()).map(|k| Vec3::new(c[0][k], c[1][k], c[2][k])).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveStats {
    pub name: String,
    pub iterations: usize,
    /// ‖b − Au‖ / ‖b‖ at termination.
    pub relative_residual: f64,
}

/// (−∂₂f, ∂₁f) by centred differences.
pub fn grad_perp(grid: &Grid, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let g2 = d2(grid, f);
    (g2.iter().map(|v| -v).collect(), d1(grid, f))
}

/// Five-point solve of Δu = f on the open unit disk with u = 0 elsewhere.
pub fn solve_dirichlet(grid: &Grid, source: &[f64]) -> Result<(Vec<f64>, SolveStats)> {
    if source.len() != grid.len() {
        return Err(Error::InvalidParameter("source does not match the grid".into()));
    }
    DirichletProblem::new(grid).solve(grid, source, "u")
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// (semi)definite operator. With `zero_mean` the iteration is kept in the
/// complement of the constant vector, which must span the kernel.
fn conjugate_gradient(
    apply: &dyn Fn(&[f64], &mut [f64]),
    b: &[f64],
    diag: &[f64],
    zero_mean: bool,
    name: &str,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let center = |v: &mut [f64]| {
        if zero_mean {
            let mean = v.iter().sum::<f64>() / n as f64;
            v.iter_mut().for_each(|x| *x -= mean);
        }
    };
    let mut rhs = b.to_vec();
    center(&mut rhs);
    let bnorm = dot(&rhs, &rhs).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, SolveStats { name: name.into(), iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    center(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let max_iterations = 20 * n.max(100);
    for it in 1..=max_iterations {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= CG_TOLERANCE {
            center(&mut x);
            return Ok((x, SolveStats { name: name.into(), iterations: it, relative_residual: rel }));
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        center(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::SolverNonConvergence { iterations: max_iterations, residual: dot(&r, &r).sqrt() / bnorm })
}

/// Δu = f on the open disk with u = 0 outside.
struct DirichletProblem {
    nodes: Vec<usize>,
    neighbours: Vec<[Option<usize>; 4]>,
    h2: f64,
}

impl DirichletProblem {
    fn new(g: &Grid) -> Self {
        let nodes: Vec<usize> = (0..g.len()).filter(|&k| g.radius_sq(k) < 1.0 - 1e-12).collect();
        let mut unknown = vec![None; g.len()];
        for (u, &k) in nodes.iter().enumerate() {
            unknown[k] = Some(u);
        }
        let neighbours = nodes.iter().map(|&k| [unknown[k + g.m], unknown[k - g.m], unknown[k + 1], unknown[k - 1]]).collect();
        Self { nodes, neighbours, h2: g.h * g.h }
    }

    fn solve(&self, g: &Grid, source: &[f64], name: &str) -> Result<(Vec<f64>, SolveStats)> {
        // −Δ_h is positive definite
        let b: Vec<f64> = self.nodes.iter().map(|&k| -source[k]).collect();
        let apply = |u: &[f64], out: &mut [f64]| {
            for (row, nb) in self.neighbours.iter().enumerate() {
                let mut acc = 4.0 * u[row];
                for v in nb.iter().flatten() {
                    acc -= u[*v];
                }
                out[row] = acc / self.h2;
            }
        };
        let diag = vec![4.0 / self.h2; self.nodes.len()];
        let (u, stats) = conjugate_gradient(&apply, &b, &diag, false, name)?;
        let mut out = vec![0.0; g.len()];
        for (row, &k) in self.nodes.iter().enumerate() {
            out[k] = u[row];
        }
        Ok((out, stats))
    }
}

/// Least-squares potential U on the closed disk with ∇U matched to a given
/// vector field along grid edges; zero mean.
struct GradientProblem {
    nodes: Vec<usize>,
    /// (unknown a, unknown b, grid a, grid b, direction 0 for x1 / 1 for x2)
    edges: Vec<(usize, usize, usize, usize, usize)>,
    degree: Vec<f64>,
}

impl GradientProblem {
    fn new(g: &Grid) -> Self {
        let nodes: Vec<usize> = (0..g.len()).filter(|&k| g.radius_sq(k) <= 1.0 + 1e-12).collect();
        let mut unknown = vec![None; g.len()];
        for (u, &k) in nodes.iter().enumerate() {
            unknown[k] = Some(u);
        }
        let mut edges = Vec::new();
        let mut degree = vec![0.0; nodes.len()];
        for (ua, &k) in nodes.iter().enumerate() {
            for (dir, step) in [(0, g.m), (1, 1)] {
                if let Some(ub) = unknown[k + step] {
                    edges.push((ua, ub, k, k + step, dir));
                    degree[ua] += 1.0;
                    degree[ub] += 1.0;
                }
            }
        }
        Self { nodes, edges, degree }
    }

    /// Potential U whose grad-perp (−∂₂U, ∂₁U) best matches (a1, a2).
    fn solve_perp(&self, g: &Grid, a1: &[f64], a2: &[f64], name: &str) -> Result<(Vec<f64>, SolveStats)> {
        // ∂₁U = a2 and ∂₂U = −a1
        let target = |k: usize, dir: usize| if dir == 0 { a2[k] } else { -a1[k] };
        let mut b = vec![0.0; self.nodes.len()];
        for &(ua, ub, ka, kb, dir) in &self.edges {
            let t = g.h * 0.5 * (target(ka, dir) + target(kb, dir));
            b[ua] -= t;
            b[ub] += t;
        }
        let apply = |u: &[f64], out: &mut [f64]| {
            out.iter_mut().for_each(|o| *o = 0.0);
            for &(ua, ub, _, _, _) in &self.edges {
                let d = u[ub] - u[ua];
                out[ua] -= d;
                out[ub] += d;
            }
        };
        let (u, stats) = conjugate_gradient(&apply, &b, &self.degree, true, name)?;
        let mut out = vec![0.0; g.len()];
        for (row, &k) in self.nodes.iter().enumerate() {
            out[k] = u[row];
        }
        Ok((out, stats))
    }

    fn solve_perp_vec(&self, g: &Grid, a1: &[Vec3], a2: &[Vec3], name: &str) -> Result<(Vec<Vec3>, Vec<SolveStats>)> {
        let (c1, c2) = (to_components(a1), to_components(a2));
        let solved: Vec<Result<(Vec<f64>, SolveStats)>> = (0..3)
            .into_par_iter()
            .map(|c| self.solve_perp(g, &c1[c], &c2[c], &format!("{name}[{c}]")))
            .collect();
        let mut comps = Vec::with_capacity(3);
        let mut stats = Vec::with_capacity(3);
        for s in solved {
            let (u, st) = s?;
            comps.push(u);
            stats.push(st);
        }
        let comps: [Vec<f64>; 3] = comps.try_into().expect("three components");
        Ok((from_components(&comps), stats))
    }
}

fn dirichlet_vec(p: &DirichletProblem, g: &Grid, source: &[Vec3], name: &str) -> Result<(Vec<Vec3>, Vec<SolveStats>)> {
    let comps = to_components(source);
    let solved: Vec<Result<(Vec<f64>, SolveStats)>> =
        (0..3).into_par_iter().map(|c| p.solve(g, &comps[c], &format!("{name}[{c}]"))).collect();
    let mut out = Vec::with_capacity(3);
    let mut stats = Vec::with_capacity(3);
    for s in solved {
        let (u, st) = s?;
        out.push(u);
        stats.push(st);
    }
    let out: [Vec<f64>; 3] = out.try_into().expect("three components");
    Ok((from_components(&out), stats))
}

/// Differential quantities of the chart entering the system.
struct ChartCalculus {
    p1: Vec<Vec3>,
    p2: Vec<Vec3>,
    n1: Vec<Vec3>,
    n2: Vec<Vec3>,
    hvec: Vec<Vec3>,
    /// 𝓦 = Div ½(2∇H⃗ − 3H∇n + H⃗ × ∇⊥n).
    willmore_source: Vec<Vec3>,
    /// T = c0∇n + (2c0H − c0² − α)∇Φ − (ρ'/2)Φ × ∇⊥Φ.
    t1: Vec<Vec3>,
    t2: Vec<Vec3>,
    /// Chart pressure ρ' = −3ρ.
    chart_rho: f64,
}

fn calculus(chart: &DiskChart, params: &EnergyParams) -> ChartCalculus {
    let g = &chart.grid;
    let EnergyParams { c0, alpha, rho } = *params;
    let chart_rho = -3.0 * rho;
    let (p1, p2) = (d1(g, &chart.phi), d2(g, &chart.phi));
    let (n1, n2) = (d1(g, &chart.normal), d2(g, &chart.normal));
    let hvec = zip_map(&chart.normal, &chart.mean_curvature, |n, h| n * h);
    let (hv1, hv2) = (d1(g, &hvec), d2(g, &hvec));
    // ∇⊥f = (−∂₂f, ∂₁f)
    let w1: Vec<Vec3> = (0..g.len())
        .map(|k| (hv1[k] * 2.0 - n1[k] * (3.0 * chart.mean_curvature[k]) + hvec[k].cross(&(-n2[k]))) * 0.5)
        .collect();
    let w2: Vec<Vec3> = (0..g.len())
        .map(|k| (hv2[k] * 2.0 - n2[k] * (3.0 * chart.mean_curvature[k]) + hvec[k].cross(&n1[k])) * 0.5)
        .collect();
    let (dw1, dw2) = (d1(g, &w1), d2(g, &w2));
    let willmore_source = zip_map(&dw1, &dw2, |a, b| a + b);
    let kappa: Vec<f64> = chart.mean_curvature.iter().map(|h| 2.0 * c0 * h - c0 * c0 - alpha).collect();
    let t1 = (0..g.len())
        .map(|k| n1[k] * c0 + p1[k] * kappa[k] - chart.phi[k].cross(&(-p2[k])) * (0.5 * chart_rho))
        .collect();
    let t2 = (0..g.len())
        .map(|k| n2[k] * c0 + p2[k] * kappa[k] - chart.phi[k].cross(&p1[k]) * (0.5 * chart_rho))
        .collect();
    ChartCalculus { p1, p2, n1, n2, hvec, willmore_source, t1, t2, chart_rho }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialSet {
    pub v: Vec<Vec3>,
    pub x: Vec<Vec3>,
    pub y: Vec<f64>,
    pub l: Vec<Vec3>,
    pub r: Vec<Vec3>,
    pub s: Vec<f64>,
    pub solves: Vec<SolveStats>,
    /// ‖∇⊥U − target‖ on the half-radius subdisk for U = L, R, S.
    pub gradient_residuals: GradientResiduals,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct GradientResiduals {
    pub l: f64,
    pub r: f64,
    pub s: f64,
}

fn half_disk_norm<T: Copy>(g: &Grid, f: &[T], sq: impl Fn(T) -> f64) -> f64 {
    let sum: f64 = (0..g.len()).filter(|&k| g.radius_sq(k) <= 0.25 + 1e-12).map(|k| sq(f[k])).sum();
    (sum * g.h * g.h).sqrt()
}

fn vec_norm(g: &Grid, f: &[Vec3]) -> f64 {
    half_disk_norm(g, f, |v| v.norm_squared())
}

fn scalar_norm(g: &Grid, f: &[f64]) -> f64 {
    half_disk_norm(g, f, |v| v * v)
}

/// Norm of ∇⊥U − (a1, a2) for a vector potential.
fn perp_mismatch_vec(g: &Grid, u: &[Vec3], a1: &[Vec3], a2: &[Vec3]) -> f64 {
    let (u1, u2) = (d1(g, u), d2(g, u));
    let sum: f64 = (0..g.len())
        .filter(|&k| g.radius_sq(k) <= 0.25 + 1e-12)
        .map(|k| (-u2[k] - a1[k]).norm_squared() + (u1[k] - a2[k]).norm_squared())
        .sum();
    (sum * g.h * g.h).sqrt()
}

fn perp_mismatch(g: &Grid, u: &[f64], a1: &[f64], a2: &[f64]) -> f64 {
    let (u1, u2) = (d1(g, u), d2(g, u));
    let sum: f64 = (0..g.len())
        .filter(|&k| g.radius_sq(k) <= 0.25 + 1e-12)
        .map(|k| (-u2[k] - a1[k]).powi(2) + (u1[k] - a2[k]).powi(2))
        .sum();
    (sum * g.h * g.h).sqrt()
}

pub fn solve_potentials(chart: &DiskChart, params: &EnergyParams) -> Result<PotentialSet> {
    params.validate()?;
    let g = &chart.grid;
    let c = calculus(chart, params);
    let dirichlet = DirichletProblem::new(g);
    let gradient = GradientProblem::new(g);
    let mut solves = Vec::new();

    let minus_w: Vec<Vec3> = c.willmore_source.iter().map(|w| -w).collect();
    let (v, st) = dirichlet_vec(&dirichlet, g, &minus_w, "V")?;
    solves.extend(st);
    let (v1, v2) = (d1(g, &v), d2(g, &v));
    let x_src: Vec<Vec3> = (0..g.len()).map(|k| v1[k].cross(&c.p1[k]) + v2[k].cross(&c.p2[k])).collect();
    let (x, st) = dirichlet_vec(&dirichlet, g, &x_src, "X")?;
    solves.extend(st);
    let y_src: Vec<f64> = (0..g.len()).map(|k| v1[k].dot(&c.p1[k]) + v2[k].dot(&c.p2[k])).collect();
    let (y, st) = dirichlet.solve(g, &y_src, "Y")?;
    solves.push(st);
    let (x1, x2) = (d1(g, &x), d2(g, &x));
    let (y1, y2) = (d1(g, &y), d2(g, &y));

    // ∇⊥L = T − ∇V
    let la1 = zip_map(&c.t1, &v1, |t, v| t - v);
    let la2 = zip_map(&c.t2, &v2, |t, v| t - v);
    let (l, st) = gradient.solve_perp_vec(g, &la1, &la2, "L")?;
    solves.extend(st);

    // ∇⊥R = L × ∇⊥Φ − H⃗ × ∇Φ − ∇X
    let ra1: Vec<Vec3> = (0..g.len()).map(|k| l[k].cross(&(-c.p2[k])) - c.hvec[k].cross(&c.p1[k]) - x1[k]).collect();
    let ra2: Vec<Vec3> = (0..g.len()).map(|k| l[k].cross(&c.p1[k]) - c.hvec[k].cross(&c.p2[k]) - x2[k]).collect();
    let (r, st) = gradient.solve_perp_vec(g, &ra1, &ra2, "R")?;
    solves.extend(st);

    // ∇⊥S = L · ∇⊥Φ − ∇Y
    let sa1: Vec<f64> = (0..g.len()).map(|k| l[k].dot(&(-c.p2[k])) - y1[k]).collect();
    let sa2: Vec<f64> = (0..g.len()).map(|k| l[k].dot(&c.p1[k]) - y2[k]).collect();
    let (s, st) = gradient.solve_perp(g, &sa1, &sa2, "S")?;
    solves.push(st);

    let gradient_residuals = GradientResiduals {
        l: perp_mismatch_vec(g, &l, &la1, &la2),
        r: perp_mismatch_vec(g, &r, &ra1, &ra2),
        s: perp_mismatch(g, &s, &sa1, &sa2),
    };
    Ok(PotentialSet { v, x, y, l, r, s, solves, gradient_residuals })
}

/// Half-disk L² norms of the four equation residuals.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EquationResiduals {
    pub r: f64,
    pub s: f64,
    pub y: f64,
    pub phi: f64,
}

impl EquationResiduals {
    pub fn as_array(&self) -> [f64; 4] {
        [self.r, self.s, self.y, self.phi]
    }

    pub const NAMES: [&'static str; 4] = ["R", "S", "Y", "Phi"];
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConservationReport {
    pub patch: Patch,
    pub params: EnergyParams,
    pub n: usize,
    pub h: f64,
    pub conformality_defect: f64,
    pub residuals: EquationResiduals,
    pub gradient_residuals: GradientResiduals,
    pub max_solver_residual: f64,
}

/// Evaluates
///
/// ΔR = −⟨∇⊥n, ∇S⟩ − ∇⊥n × ∇R + Div(n∇Y),
/// ΔS = ∇⊥n · ∇R,
/// ΔY = |∇Φ|²(−(c0² + α) + c0H − (ρ'/2)Φ·n),
/// ΔΦ = ⟨∇⊥S, ∇Φ⟩ + ∇⊥R × ∇Φ + ∇Φ·∇Y,
///
/// at every node and returns their half-disk norms.
pub fn check_conservation_residuals(
    chart: &DiskChart,
    potentials: &PotentialSet,
    params: &EnergyParams,
) -> Result<ConservationReport> {
    params.validate()?;
    let g = &chart.grid;
    let len = g.len();
    let shapes = [potentials.v.len(), potentials.x.len(), potentials.y.len(), potentials.l.len(), potentials.r.len(), potentials.s.len()];
    if shapes.iter().any(|&l| l != len) {
        return Err(Error::InvalidParameter("potentials were not solved on this chart".into()));
    }
    let EnergyParams { c0, alpha, .. } = *params;
    let c = calculus(chart, params);
    let (r1, r2) = (d1(g, &potentials.r), d2(g, &potentials.r));
    let (s1, s2) = (d1(g, &potentials.s), d2(g, &potentials.s));
    let (y1, y2) = (d1(g, &potentials.y), d2(g, &potentials.y));
    let ny1 = zip_map(&chart.normal, &y1, |n, y| n * y);
    let ny2 = zip_map(&chart.normal, &y2, |n, y| n * y);
    let div_ny = zip_map(&d1(g, &ny1), &d2(g, &ny2), |a, b| a + b);

    let lap_r = laplacian(g, &potentials.r);
    let lap_s = laplacian(g, &potentials.s);
    let lap_y = laplacian(g, &potentials.y);
    let lap_phi = laplacian(g, &chart.phi);

    let res_r: Vec<Vec3> = (0..len)
        .map(|k| {
            let (gn1, gn2) = (-c.n2[k], c.n1[k]);
            let rhs = -(gn1 * s1[k] + gn2 * s2[k]) - (gn1.cross(&r1[k]) + gn2.cross(&r2[k])) + div_ny[k];
            lap_r[k] - rhs
        })
        .collect();
    let res_s: Vec<f64> = (0..len)
        .map(|k| {
            let (gn1, gn2) = (-c.n2[k], c.n1[k]);
            lap_s[k] - (gn1.dot(&r1[k]) + gn2.dot(&r2[k]))
        })
        .collect();
    let res_y: Vec<f64> = (0..len)
        .map(|k| {
            let grad_sq = c.p1[k].norm_squared() + c.p2[k].norm_squared();
            let h = chart.mean_curvature[k];
            let factor = -(c0 * c0 + alpha) + c0 * h - 0.5 * c.chart_rho * chart.phi[k].dot(&chart.normal[k]);
            lap_y[k] - grad_sq * factor
        })
        .collect();
    let res_phi: Vec<Vec3> = (0..len)
        .map(|k| {
            let (gs1, gs2) = (-s2[k], s1[k]);
            let (gr1, gr2) = (-r2[k], r1[k]);
            let rhs = c.p1[k] * gs1 + c.p2[k] * gs2 + gr1.cross(&c.p1[k]) + gr2.cross(&c.p2[k]) + c.p1[k] * y1[k] + c.p2[k] * y2[k];
            lap_phi[k] - rhs
        })
        .collect();

    Ok(ConservationReport {
        patch: chart.patch,
        params: *params,
        n: g.n,
        h: g.h,
        conformality_defect: chart.conformality_defect,
        residuals: EquationResiduals {
            r: vec_norm(g, &res_r),
            s: scalar_norm(g, &res_s),
            y: scalar_norm(g, &res_y),
            phi: vec_norm(g, &res_phi),
        },
        gradient_residuals: potentials.gradient_residuals,
        max_solver_residual: potentials.solves.iter().map(|s| s.relative_residual).fold(0.0, f64::max),
    })
}

/// Residuals at several resolutions and the orders fitted to them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub patch: Patch,
    pub params: EnergyParams,
    pub reports: Vec<ConservationReport>,
    /// Least-squares slope of log(residual) against log(h), per equation.
    pub orders: EquationResiduals,
    /// Same fit for ‖∇⊥L − (T − ∇V)‖.
    pub l_order: f64,
}

impl RefinementStudy {
    /// True when every equation converges at order ≥ `min_order`.
    pub fn all_converge(&self, min_order: f64) -> bool {
        self.orders.as_array().iter().all(|&o| o >= min_order)
    }

    /// True when some equation converges at order below `max_order`.
    pub fn some_stagnates(&self, max_order: f64) -> bool {
        self.orders.as_array().iter().any(|&o| o < max_order)
    }
}

/// Slope of log y against log h; residuals at or below 1e−13 count as
/// converged to round-off and get an infinite order.
pub fn fitted_order(h: &[f64], y: &[f64]) -> f64 {
    if y.iter().all(|&v| v <= 1e-13) {
        return f64::INFINITY;
    }
    let pts: Vec<(f64, f64)> = h.iter().zip(y).map(|(h, y)| (h.ln(), y.max(1e-300).ln())).collect();
    let k = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / k, pts.iter().map(|p| p.1).sum::<f64>() / k);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

pub fn conservation_report(patch: &Patch, params: &EnergyParams, n: usize) -> Result<ConservationReport> {
    let chart = build_chart(patch, n)?;
    let potentials = solve_potentials(&chart, params)?;
    check_conservation_residuals(&chart, &potentials, params)
}

pub fn refinement_study(patch: &Patch, params: &EnergyParams, resolutions: &[usize]) -> Result<RefinementStudy> {
    if resolutions.len() < 2 {
        return Err(Error::InvalidParameter("a refinement study needs at least two resolutions".into()));
    }
    let reports = resolutions
        .par_iter()
        .map(|&n| conservation_report(patch, params, n))
        .collect::<Result<Vec<_>>>()?;
    let h: Vec<f64> = reports.iter().map(|r| r.h).collect();
    let order_of = |f: &dyn Fn(&ConservationReport) -> f64| fitted_order(&h, &reports.iter().map(f).collect::<Vec<_>>());
    let orders = EquationResiduals {
        r: order_of(&|r| r.residuals.r),
        s: order_of(&|r| r.residuals.s),
        y: order_of(&|r| r.residuals.y),
        phi: order_of(&|r| r.residuals.phi),
    };
    let l_order = order_of(&|r| r.gradient_residuals.l);
    Ok(RefinementStudy { patch: *patch, params: *params, reports, orders, l_order })
}
