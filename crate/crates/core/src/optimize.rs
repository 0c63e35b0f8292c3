//! Constrained minimisation of the general energy by an augmented-Lagrangian
//! gradient flow with exact constraint projection, checkpointing and
//! bubbling detection, plus the isoperimetric sweep built on it.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bubbling::{bubbling_diagnostics, BubblingOptions, BubblingReport};
use crate::energy::{energy_with_convention, isoperimetric_feasible, EnergyBreakdown, EnergyParams, VolumeConvention};
use crate::error::{Error, Result};
use crate::generators::gen_ellipsoid;
use crate::geometry::{diameter, enclosed_volume, total_area, vertex_geometry};
use crate::io::{load_mesh, save_mesh};
use crate::mesh::{TriangleMesh, Vec3};
use crate::remesh::maintain;
use crate::report::to_json_string;
use crate::variations::{grad_helfrich, grad_volume};

/// Target area and enclosed volume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub area: f64,
    pub volume: f64,
}

impl ConstraintSpec {
    pub fn new(area: f64, volume: f64) -> Result<Self> {
        if !(area.is_finite() && volume.is_finite() && area > 0.0 && volume > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "constraint targets must be positive, got A0 = {area}, V0 = {volume}"
            )));
        }
        Ok(Self { area, volume })
    }

    /// Targets with area A0 and isoperimetric ratio 36πV0²/A0³ = ratio.
    pub fn from_ratio(area: f64, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::InvalidParameter(format!("isoperimetric ratio {ratio} must lie in (0, 1]")));
        }
        Self::new(area, (ratio * area.powi(3) / (36.0 * PI)).sqrt())
    }

    pub fn feasible(&self) -> bool {
        isoperimetric_feasible(self.area, self.volume)
    }

    pub fn isoperimetric_ratio(&self) -> f64 {
        36.0 * PI * self.volume * self.volume / self.area.powi(3)
    }

    /// Relative violations (area/A0 − 1, volume/V0 − 1).
    pub fn violations(&self, area: f64, volume: f64) -> [f64; 2] {
        [area / self.area - 1.0, volume / self.volume - 1.0]
    }

    pub fn check(&self) -> Result<()> {
        Self::new(self.area, self.volume)?;
        if !self.feasible() {
            return Err(Error::ConstraintViolation(format!(
                "(A0, V0) = ({}, {}) violates A0³ ≥ 36πV0² (ratio {})",
                self.area,
                self.volume,
                self.isoperimetric_ratio()
            )));
        }
        Ok(())
    }
}

fn violations_of(mesh: &TriangleMesh, c: &ConstraintSpec) -> [f64; 2] {
    c.violations(total_area(mesh), enclosed_volume(mesh).volume)
}

fn max_abs(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Projection {
    pub mesh: TriangleMesh,
    pub violations: [f64; 2],
    pub iterations: usize,
    pub converged: bool,
}

/// Newton iteration on the two-parameter family Φ ↦ c + s(Φ − c) + t·D,
/// with c the centroid and D_i = ∇_i Area / A_i. When the iteration stops
/// contracting (the targets are out of reach of small deformations, e.g. a
/// ratio above what the polyhedron can attain) the mesh is instead scaled
/// about its centroid to match the area exactly, leaving the volume
/// violation. `converged` reports whether both targets were met to `tol`.
pub fn project_least_violation(
    mesh: &TriangleMesh,
    constraints: &ConstraintSpec,
    tol: f64,
    max_steps: usize,
) -> Result<Projection> {
    let g0 = vertex_geometry(mesh)?;
    let center = mesh.centroid();
    let base: Vec<Vec3> = mesh.vertices.iter().map(|x| x - center).collect();
    let dir: Vec<Vec3> = (0..g0.len()).map(|i| g0.lvec[i] / g0.area[i]).collect();
    let build = |s: f64, t: f64| {
        TriangleMesh::new(
            base.iter().zip(&dir).map(|(b, d)| center + b * s + d * t).collect(),
            mesh.faces.clone(),
        )
    };
    let residual = |m: &TriangleMesh| violations_of(m, constraints);
    let norm = |v: [f64; 2]| v[0].hypot(v[1]);

    let area = total_area(mesh);
    if !(area > 0.0) {
        return Err(Error::DegenerateGeometry("mesh has zero area".into()));
    }
    let rescale = || mesh.translated(&-center).scaled((constraints.area / area).sqrt()).translated(&center);

    let (mut s, mut t) = (1.0, 0.0);
    let mut current = mesh.clone();
    let mut r = residual(&current);
    if max_abs(r) > tol {
        // targets reachable by a pure scaling need no shape change
        let scaled = rescale();
        let rs = residual(&scaled);
        if max_abs(rs) <= tol {
            return Ok(Projection { mesh: scaled, violations: rs, iterations: 0, converged: true });
        }
    }
    let mut iterations = 0;
    while max_abs(r) > tol && iterations < max_steps {
        iterations += 1;
        let g = vertex_geometry(&current)?;
        let gv = grad_volume(&current)?;
        let dot = |a: &[Vec3], b: &[Vec3]| a.iter().zip(b).map(|(x, y)| x.dot(y)).sum::<f64>();
        let j = Matrix2::new(
            dot(&g.lvec, &base) / constraints.area,
            dot(&g.lvec, &dir) / constraints.area,
            dot(&gv.values, &base) / constraints.volume,
            dot(&gv.values, &dir) / constraints.volume,
        );
        let svd = j.svd(true, true);
        let delta = svd
            .solve(&Vector2::new(-r[0], -r[1]), 1e-12 * svd.singular_values.max())
            .map_err(|e| Error::DegenerateGeometry(format!("projection Jacobian: {e}")))?;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let candidate = build(s + scale * delta[0], t + scale * delta[1]);
            if candidate.check_nondegenerate().is_ok() {
                let rc = residual(&candidate);
                if norm(rc) < norm(r) {
                    accepted = Some((candidate, rc));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((candidate, rc)) = accepted else { break };
        // stagnation means the targets are out of reach of the family
        let slow = norm(rc) > 0.99 * norm(r);
        s += scale * delta[0];
        t += scale * delta[1];
        current = candidate;
        r = rc;
        if slow && iterations >= 2 && max_abs(r) > tol {
            break;
        }
    }
    if max_abs(r) <= tol {
        return Ok(Projection { mesh: current, violations: r, iterations, converged: true });
    }
    let scaled = rescale();
    let r = residual(&scaled);
    Ok(Projection { mesh: scaled, violations: r, iterations, converged: max_abs(r) <= tol })
}

/// Restores area and volume to relative accuracy `tol` (default 1e−9).
pub fn project_constraints(mesh: &TriangleMesh, constraints: &ConstraintSpec) -> Result<TriangleMesh> {
    project_constraints_with(mesh, constraints, 1e-9, 50)
}

pub fn project_constraints_with(
    mesh: &TriangleMesh,
    constraints: &ConstraintSpec,
    tol: f64,
    max_steps: usize,
) -> Result<TriangleMesh> {
    constraints.check()?;
    let p = project_least_violation(mesh, constraints, tol, max_steps)?;
    if p.converged {
        Ok(p.mesh)
    } else {
        Err(Error::ProjectionFailed {
            iterations: p.iterations,
            area_violation: p.violations[0],
            volume_violation: p.violations[1],
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MinimizeOptions {
    pub max_iterations: usize,
    /// Stop when the projected gradient falls below this fraction of its
    /// initial value.
    pub gtol_rel: f64,
    pub armijo: f64,
    pub initial_step: f64,
    pub step_floor: f64,
    /// Largest vertex displacement per step, as a fraction of the vertex's
    /// shortest incident edge.
    pub max_displacement: f64,
    /// Start each line search from twice the last accepted step (capped at
    /// `initial_step`) instead of from `initial_step`.
    pub warm_start: bool,
    pub maintenance_interval: usize,
    pub smoothing_weight: f64,
    pub constraint_tol: f64,
    pub projection_tol: f64,
    pub projection_max_steps: usize,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub penalty_cap: f64,
    /// Accepted steps per augmented-Lagrangian round.
    pub inner_iterations: usize,
    /// Stop when energy and violations change by less than `stall_rtol`
    /// (relative) over this many iterations.
    pub stall_window: usize,
    pub stall_rtol: f64,
    /// Stop when the bounding-box diagonal shrinks below this fraction of
    /// its initial value.
    pub collapse_fraction: f64,
    pub volume_convention: VolumeConvention,
    pub bubbling: BubblingOptions,
    pub checkpoint_every: Option<usize>,
    pub checkpoint_dir: Option<PathBuf>,
    /// Recorded in checkpoints; the flow itself draws no random numbers.
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            gtol_rel: 1e-6,
            armijo: 1e-4,
            initial_step: 1.0,
            step_floor: 1e-12,
            max_displacement: 0.5,
            warm_start: true,
            maintenance_interval: 25,
            smoothing_weight: 0.05,
            constraint_tol: 1e-6,
            projection_tol: 1e-9,
            projection_max_steps: 50,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            penalty_cap: 1e8,
            inner_iterations: 200,
            stall_window: 500,
            stall_rtol: 1e-10,
            collapse_fraction: 1e-3,
            volume_convention: VolumeConvention::Flux,
            bubbling: BubblingOptions::default(),
            checkpoint_every: None,
            checkpoint_dir: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowStatus {
    Running,
    Converged,
    Stalled,
    MaxIterations,
    LineSearchFailed,
    BubblingSuspected,
    Collapsed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub energy: f64,
    pub merit: f64,
    pub willmore: f64,
    pub helfrich: f64,
    pub area: f64,
    pub volume: f64,
    pub area_violation: f64,
    pub volume_violation: f64,
    pub step: f64,
    pub projected_gradient: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowState {
    #[serde(skip)]
    pub mesh: TriangleMesh,
    pub params: EnergyParams,
    pub constraints: Option<ConstraintSpec>,
    /// (λ_A, λ_V) for the relative constraints.
    pub multipliers: [f64; 2],
    /// (μ_A, μ_V).
    pub penalties: [f64; 2],
    /// Least-squares estimate of (α, ρ) at the latest iterate, from
    /// ∇E ≈ −α∇Area − 3ρ∇Vol.
    pub multiplier_estimate: [f64; 2],
    pub iteration: usize,
    pub inner_iteration: usize,
    pub step: f64,
    pub energy_history: Vec<HistoryRow>,
    pub violations: [f64; 2],
    /// Violation norm at the end of the previous outer round.
    pub previous_round_violation: f64,
    pub projection_converged: bool,
    pub initial_diameter: f64,
    pub initial_bbox_diagonal: f64,
    pub initial_projected_gradient: f64,
    pub flips: usize,
    pub line_search_failures: usize,
    pub bubbling: Option<BubblingReport>,
    pub status: FlowStatus,
    pub seed: u64,
}

impl FlowState {
    /// The augmented-Lagrangian multipliers expressed as the tensile stress α
    /// and pressure ρ of the general energy.
    pub fn multiplier_estimates(&self) -> Option<(f64, f64)> {
        self.constraints.map(|c| (-self.multipliers[0] / c.area, -self.multipliers[1] / (3.0 * c.volume)))
    }

    pub fn final_energy(&self) -> Option<&HistoryRow> {
        self.energy_history.last()
    }

    pub fn history_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "iteration",
            "energy",
            "merit",
            "willmore",
            "helfrich",
            "area",
            "volume",
            "area_violation",
            "volume_violation",
            "step",
            "projected_gradient",
        ])
        .map_err(csv_error)?;
        for r in &self.energy_history {
            let f = |x: f64| format!("{x:.16e}");
            w.write_record([
                r.iteration.to_string(),
                f(r.energy),
                f(r.merit),
                f(r.willmore),
                f(r.helfrich),
                f(r.area),
                f(r.volume),
                f(r.area_violation),
                f(r.volume_violation),
                f(r.step),
                f(r.projected_gradient),
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn save_checkpoint(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        save_mesh(&self.mesh, dir.join("checkpoint.ply"))?;
        std::fs::write(dir.join("checkpoint.json"), to_json_string(self)?)?;
        Ok(())
    }

    pub fn load_checkpoint(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("checkpoint.json"))?;
        let mut state: FlowState = serde_json::from_str(&text)?;
        state.mesh = load_mesh(dir.join("checkpoint.ply"))?;
        Ok(state)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Serialization(e.to_string())
}

struct Evaluation {
    breakdown: EnergyBreakdown,
    violations: [f64; 2],
    merit: f64,
}

struct Problem<'a> {
    params: &'a EnergyParams,
    constraints: Option<&'a ConstraintSpec>,
    convention: VolumeConvention,
}

impl Problem<'_> {
    fn evaluate(&self, mesh: &TriangleMesh, lambda: [f64; 2], mu: [f64; 2]) -> Result<Evaluation> {
        let breakdown = energy_with_convention(mesh, self.params, self.convention)?;
        let energy = breakdown.general;
        let (violations, merit) = match self.constraints {
            Some(c) => {
                let v = c.violations(breakdown.area, breakdown.volume);
                let m = energy + (0..2).map(|k| -lambda[k] * v[k] + 0.5 * mu[k] * v[k] * v[k]).sum::<f64>();
                (v, m)
            }
            None => ([0.0; 2], energy),
        };
        if !merit.is_finite() {
            return Err(Error::DegenerateGeometry("energy is not finite".into()));
        }
        Ok(Evaluation { breakdown, violations, merit })
    }

    /// Energy gradient, constraint gradients and the lumped mass.
    fn gradients(&self, mesh: &TriangleMesh) -> Result<Gradients> {
        let g = vertex_geometry(mesh)?;
        let ge = grad_helfrich(mesh, self.params)?.values;
        let gc = match self.constraints {
            Some(c) => {
                let ga = g.lvec.iter().map(|v| v / c.area).collect();
                let gv = grad_volume(mesh)?.values.iter().map(|v| v / c.volume).collect();
                [ga, gv]
            }
            None => [Vec::new(), Vec::new()],
        };
        Ok((ge, gc, g.area))
    }
}

/// ⟨a, b⟩ in the lumped-mass dual metric Σ a_i·b_i / A_i.
fn dual_dot(a: &[Vec3], b: &[Vec3], mass: &[f64]) -> f64 {
    a.iter().zip(b).zip(mass).map(|((x, y), m)| x.dot(y) / m).sum()
}

/// Least-squares multipliers λ̂ minimising |g − Σ λ_k ∇c_k| and the
/// resulting projected gradient norm.
fn projected_gradient(ge: &[Vec3], gc: &[Vec<Vec3>; 2], mass: &[f64]) -> ([f64; 2], f64) {
    if gc[0].is_empty() {
        return ([0.0; 2], dual_dot(ge, ge, mass).sqrt());
    }
    let gram = Matrix2::new(
        dual_dot(&gc[0], &gc[0], mass),
        dual_dot(&gc[0], &gc[1], mass),
        dual_dot(&gc[1], &gc[0], mass),
        dual_dot(&gc[1], &gc[1], mass),
    );
    let rhs = Vector2::new(dual_dot(ge, &gc[0], mass), dual_dot(ge, &gc[1], mass));
    let svd = gram.svd(true, true);
    let lam = svd.solve(&rhs, 1e-6 * svd.singular_values.max()).unwrap_or(Vector2::zeros());
    let p: Vec<Vec3> = (0..ge.len()).map(|i| ge[i] - gc[0][i] * lam[0] - gc[1][i] * lam[1]).collect();
    ([lam[0], lam[1]], dual_dot(&p, &p, mass).sqrt())
}

/// Largest t for which every vertex moves at most `fraction` of its shortest
/// incident edge along `direction`.
fn step_cap(mesh: &TriangleMesh, direction: &[Vec3], fraction: f64) -> f64 {
    let mut shortest = vec![f64::INFINITY; mesh.num_vertices()];
    for [a, b] in mesh.edges() {
        let l = (mesh.vertices[a] - mesh.vertices[b]).norm();
        shortest[a] = shortest[a].min(l);
        shortest[b] = shortest[b].min(l);
    }
    direction
        .iter()
        .zip(&shortest)
        .map(|(d, l)| if d.norm() > 0.0 { fraction * l / d.norm() } else { f64::INFINITY })
        .fold(f64::INFINITY, f64::min)
}

/// True when some face of `after` has turned by more than 90° relative to
/// `before`; such steps are rejected so the surface cannot invert.
fn folds(before: &TriangleMesh, after: &TriangleMesh) -> bool {
    (0..before.num_faces()).any(|f| before.face_normal_scaled(f).dot(&after.face_normal_scaled(f)) <= 0.0)
}

/// Component of `g` dual-orthogonal to both constraint gradients.
fn tangent_part(g: &[Vec3], gc: &[Vec<Vec3>; 2], mass: &[f64]) -> Vec<Vec3> {
    let (beta, _) = projected_gradient(g, gc, mass);
    (0..g.len()).map(|i| g[i] - gc[0][i] * beta[0] - gc[1][i] * beta[1]).collect()
}

/// Builds the initial flow state (validating inputs) without iterating.
pub fn initial_state(
    mesh0: &TriangleMesh,
    params: &EnergyParams,
    constraints: Option<&ConstraintSpec>,
    opts: &MinimizeOptions,
) -> Result<FlowState> {
    params.validate()?;
    if let Some(c) = constraints {
        c.check()?;
    }
    let report = crate::topology::validate_topology(mesh0);
    if !report.pass {
        return Err(Error::InvalidMesh("initial mesh fails topology validation".into()));
    }
    let problem = Problem { params, constraints, convention: opts.volume_convention };
    let (mesh, projection_converged) = match constraints {
        Some(c) => {
            let p = project_least_violation(mesh0, c, opts.projection_tol, opts.projection_max_steps)?;
            (p.mesh, p.converged)
        }
        None => (mesh0.clone(), true),
    };
    let (ge, gc, mass) = problem.gradients(&mesh)?;
    let (lambda, pnorm) = projected_gradient(&ge, &gc, &mass);
    let multipliers = [0.0; 2];
    let penalties = if constraints.is_some() { [opts.penalty_init; 2] } else { [0.0; 2] };
    let eval = problem.evaluate(&mesh, multipliers, penalties)?;
    let mut state = FlowState {
        params: *params,
        constraints: constraints.copied(),
        multipliers,
        penalties,
        multiplier_estimate: match constraints {
            Some(c) => [-lambda[0] / c.area, -lambda[1] / (3.0 * c.volume)],
            None => [0.0; 2],
        },
        iteration: 0,
        inner_iteration: 0,
        step: opts.initial_step,
        energy_history: Vec::new(),
        violations: eval.violations,
        previous_round_violation: max_abs(eval.violations),
        projection_converged,
        initial_diameter: diameter(&mesh),
        initial_bbox_diagonal: mesh.bbox_diagonal(),
        initial_projected_gradient: pnorm,
        flips: 0,
        line_search_failures: 0,
        bubbling: None,
        status: FlowStatus::Running,
        seed: opts.seed,
        mesh,
    };
    state.energy_history.push(history_row(0, &eval, 0.0, pnorm));
    Ok(state)
}

fn history_row(iteration: usize, e: &Evaluation, step: f64, pnorm: f64) -> HistoryRow {
    HistoryRow {
        iteration,
        energy: e.breakdown.general,
        merit: e.merit,
        willmore: e.breakdown.willmore,
        helfrich: e.breakdown.helfrich,
        area: e.breakdown.area,
        volume: e.breakdown.volume,
        area_violation: e.violations[0],
        volume_violation: e.violations[1],
        step,
        projected_gradient: pnorm,
    }
}

/// (energy gradient, [area gradient, volume gradient], lumped mass).
type Gradients = (Vec<Vec3>, [Vec<Vec3>; 2], Vec<f64>);

pub fn minimize(
    mesh0: &TriangleMesh,
    params: &EnergyParams,
    constraints: Option<&ConstraintSpec>,
    opts: &MinimizeOptions,
) -> Result<FlowState> {
    let state = initial_state(mesh0, params, constraints, opts)?;
    continue_flow(state, opts)
}

/// Resumes a flow from a checkpoint directory.
pub fn resume(dir: &Path, opts: &MinimizeOptions) -> Result<FlowState> {
    let mut state = FlowState::load_checkpoint(dir)?;
    state.status = FlowStatus::Running;
    continue_flow(state, opts)
}

fn halt_for_degeneracy(mut state: FlowState, opts: &MinimizeOptions) -> FlowState {
    state.bubbling = bubbling_diagnostics(&state.mesh, Some(state.initial_diameter), &opts.bubbling).ok();
    state.status = FlowStatus::BubblingSuspected;
    state
}

/// Runs the flow from `state` until a stopping rule fires.
pub fn continue_flow(mut state: FlowState, opts: &MinimizeOptions) -> Result<FlowState> {
    let params = state.params;
    let constraints = state.constraints;
    let problem = Problem { params: &params, constraints: constraints.as_ref(), convention: opts.volume_convention };
    let gtol = opts.gtol_rel * state.initial_projected_gradient;
    let mut consecutive_failures = 0;

    loop {
        if state.iteration >= opts.max_iterations {
            state.status = FlowStatus::MaxIterations;
            break;
        }
        let current = match problem.evaluate(&state.mesh, state.multipliers, state.penalties) {
            Ok(e) => e,
            Err(e) if e.is_numerical() => return Ok(halt_for_degeneracy(state, opts)),
            Err(e) => return Err(e),
        };
        let (ge, gc, mass) = match problem.gradients(&state.mesh) {
            Ok(g) => g,
            Err(e) if e.is_numerical() => return Ok(halt_for_degeneracy(state, opts)),
            Err(e) => return Err(e),
        };
        let (lambda_hat, pnorm) = projected_gradient(&ge, &gc, &mass);
        let feasible = constraints.is_none() || max_abs(current.violations) <= opts.constraint_tol;
        if let Some(c) = &constraints {
            state.multiplier_estimate = [-lambda_hat[0] / c.area, -lambda_hat[1] / (3.0 * c.volume)];
        }
        if pnorm <= gtol {
            // stationary on the least-violation set but unable to reach the targets
            state.status = if feasible { FlowStatus::Converged } else { FlowStatus::Stalled };
            break;
        }

        // merit gradient restricted to the tangent space of the constraints;
        // the projection below acts as the retraction
        let mut gm = ge;
        if constraints.is_some() {
            for k in 0..2 {
                let coeff = state.penalties[k] * current.violations[k] - state.multipliers[k];
                for (g, c) in gm.iter_mut().zip(&gc[k]) {
                    *g += c * coeff;
                }
            }
            gm = if state.projection_converged {
                tangent_part(&gm, &gc, &mass)
            } else {
                // only the area is enforced by the scaling retraction
                tangent_part(&gm, &[gc[0].clone(), vec![Vec3::zeros(); gm.len()]], &mass)
            };
        }
        let direction: Vec<Vec3> = gm.iter().zip(&mass).map(|(g, m)| -g / *m).collect();
        let slope = dual_dot(&gm, &gm, &mass);

        let mut t = if opts.warm_start { (2.0 * state.step).min(opts.initial_step) } else { opts.initial_step };
        let cap = step_cap(&state.mesh, &direction, opts.max_displacement);
        while t > cap && t >= opts.step_floor {
            t *= 0.5;
        }
        let mut accepted = None;
        while t >= opts.step_floor {
            let mut trial = TriangleMesh::new(
                state.mesh.vertices.iter().zip(&direction).map(|(x, d)| x + d * t).collect(),
                state.mesh.faces.clone(),
            );
            if folds(&state.mesh, &trial) {
                t *= 0.5;
                continue;
            }
            let mut converged = true;
            if let Some(c) = &constraints {
                match project_least_violation(&trial, c, opts.projection_tol, opts.projection_max_steps) {
                    Ok(p) => {
                        converged = p.converged;
                        trial = p.mesh;
                    }
                    Err(_) => {
                        t *= 0.5;
                        continue;
                    }
                }
            }
            if let Ok(e) = problem.evaluate(&trial, state.multipliers, state.penalties) {
                if e.merit <= current.merit - opts.armijo * t * slope {
                    accepted = Some((trial, converged));
                    break;
                }
            }
            t *= 0.5;
        }

        let Some((mut next, converged)) = accepted else {
            state.line_search_failures += 1;
            consecutive_failures += 1;
            if constraints.is_some() && consecutive_failures == 1 {
                outer_update(&mut state, current.violations, opts);
                continue;
            }
            state.status = FlowStatus::LineSearchFailed;
            break;
        };
        consecutive_failures = 0;
        state.projection_converged = converged;
        state.step = t;
        state.iteration += 1;
        state.inner_iteration += 1;

        if state.iteration % opts.maintenance_interval.max(1) == 0 {
            match maintain(&mut next, opts.smoothing_weight) {
                Ok(stats) => state.flips += stats.flips,
                Err(e) if e.is_numerical() => {
                    state.mesh = next;
                    return Ok(halt_for_degeneracy(state, opts));
                }
                Err(e) => return Err(e),
            }
            if let Some(c) = &constraints {
                match project_least_violation(&next, c, opts.projection_tol, opts.projection_max_steps) {
                    Ok(p) => {
                        state.projection_converged = p.converged;
                        next = p.mesh;
                    }
                    Err(e) if e.is_numerical() => {
                        state.mesh = next;
                        return Ok(halt_for_degeneracy(state, opts));
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        state.mesh = next;

        let after = match problem.evaluate(&state.mesh, state.multipliers, state.penalties) {
            Ok(e) => e,
            Err(e) if e.is_numerical() => return Ok(halt_for_degeneracy(state, opts)),
            Err(e) => return Err(e),
        };
        state.violations = after.violations;
        state.energy_history.push(history_row(state.iteration, &after, t, pnorm));

        if state.iteration % opts.maintenance_interval.max(1) == 0 {
            let report = bubbling_diagnostics(&state.mesh, Some(state.initial_diameter), &opts.bubbling)?;
            let flagged = report.neck_detected;
            state.bubbling = Some(report);
            if flagged {
                state.status = FlowStatus::BubblingSuspected;
                break;
            }
        }
        if state.mesh.bbox_diagonal() < opts.collapse_fraction * state.initial_bbox_diagonal {
            state.status = FlowStatus::Collapsed;
            break;
        }
        if constraints.is_some()
            && state.inner_iteration >= opts.inner_iterations
            && outer_update(&mut state, after.violations, opts)
        {
            state.status = FlowStatus::Stalled;
            break;
        }
        if stalled(&state.energy_history, opts) {
            state.status = FlowStatus::Stalled;
            break;
        }
        if let (Some(every), Some(dir)) = (opts.checkpoint_every, &opts.checkpoint_dir) {
            if every > 0 && state.iteration % every == 0 {
                state.save_checkpoint(dir)?;
            }
        }
    }
    if state.bubbling.is_none() {
        state.bubbling = bubbling_diagnostics(&state.mesh, Some(state.initial_diameter), &opts.bubbling).ok();
    }
    Ok(state)
}

/// Multiplier and penalty update at the end of an inner round. Returns true
/// when the penalty is already at its cap and the round reduced the
/// violation by less than 1%, i.e. the targets are out of reach.
fn outer_update(state: &mut FlowState, violations: [f64; 2], opts: &MinimizeOptions) -> bool {
    for k in 0..2 {
        state.multipliers[k] -= state.penalties[k] * violations[k];
    }
    let norm = max_abs(violations);
    let stuck = norm > opts.constraint_tol && norm > 0.99 * state.previous_round_violation;
    let capped = state.penalties.iter().all(|&mu| mu >= opts.penalty_cap);
    if norm > opts.constraint_tol && norm > 0.25 * state.previous_round_violation {
        for mu in &mut state.penalties {
            *mu = (*mu * opts.penalty_growth).min(opts.penalty_cap);
        }
    }
    state.previous_round_violation = norm;
    state.inner_iteration = 0;
    stuck && capped
}

fn stalled(history: &[HistoryRow], opts: &MinimizeOptions) -> bool {
    let n = history.len();
    if opts.stall_window == 0 || n <= opts.stall_window {
        return false;
    }
    let (old, new) = (&history[n - 1 - opts.stall_window], &history[n - 1]);
    let rel = |a: f64, b: f64, scale: f64| (a - b).abs() <= opts.stall_rtol * scale;
    let escale = new.energy.abs().max(1e-300);
    rel(old.energy, new.energy, escale)
        && rel(old.area_violation, new.area_violation, 1.0)
        && rel(old.volume_violation, new.volume_violation, 1.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub area: f64,
    pub level: u32,
    pub minimize: MinimizeOptions,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { area: 4.0 * PI, level: 3, minimize: MinimizeOptions::default(), threads: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepRow {
    pub ratio: f64,
    pub area_target: f64,
    pub volume_target: f64,
    pub willmore: f64,
    pub helfrich: f64,
    pub area: f64,
    pub volume: f64,
    pub area_violation: f64,
    pub volume_violation: f64,
    pub iterations: usize,
    pub status: FlowStatus,
    pub initializer: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepTable {
    pub c0: f64,
    pub rows: Vec<SweepRow>,
    /// Whether final Willmore energies decrease as the ratio grows (reported only).
    pub willmore_monotone: bool,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "ratio",
            "area_target",
            "volume_target",
            "willmore",
            "helfrich",
            "area",
            "volume",
            "area_violation",
            "volume_violation",
            "iterations",
            "status",
            "initializer",
        ])
        .map_err(csv_error)?;
        for r in &self.rows {
            let f = |x: f64| format!("{x:.16e}");
            let status = serde_json::to_value(r.status)?.as_str().unwrap_or_default().to_string();
            w.write_record([
                f(r.ratio),
                f(r.area_target),
                f(r.volume_target),
                f(r.willmore),
                f(r.helfrich),
                f(r.area),
                f(r.volume),
                f(r.area_violation),
                f(r.volume_violation),
                r.iterations.to_string(),
                status,
                r.initializer.clone(),
            ])
            .map_err(csv_error)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn discrete_ratio(mesh: &TriangleMesh) -> f64 {
    let a = total_area(mesh);
    let v = enclosed_volume(mesh).volume;
    36.0 * PI * v * v / a.powi(3)
}

/// Prolate spheroid (1, 1, a) whose discrete isoperimetric ratio matches
/// `ratio` (a = 1 when the ratio exceeds the sphere's), scaled to `area`.
pub fn ratio_initializer(level: u32, area: f64, ratio: f64) -> Result<(TriangleMesh, String)> {
    let sphere_ratio = discrete_ratio(&gen_ellipsoid(level, 1.0, 1.0, 1.0)?);
    let elongation = if ratio >= sphere_ratio {
        1.0
    } else {
        let (mut lo, mut hi) = (1.0, 2.0);
        while discrete_ratio(&gen_ellipsoid(level, 1.0, 1.0, hi)?) > ratio {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::Domain(format!("ratio {ratio} is too small for the spheroid initializer")));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if discrete_ratio(&gen_ellipsoid(level, 1.0, 1.0, mid)?) > ratio {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let mesh = gen_ellipsoid(level, 1.0, 1.0, elongation)?;
    let scale = (area / total_area(&mesh)).sqrt();
    let provenance = format!("prolate spheroid (1, 1, {elongation:.12}) at level {level} scaled by {scale:.12}");
    Ok((mesh.scaled(scale), provenance))
}

/// Runs `minimize` at A0 = opts.area and V0 from each isoperimetric ratio.
/// Duplicate ratios are dropped, keeping first occurrences in input order.
pub fn isoperimetric_sweep(ratios: &[f64], c0: f64, opts: &SweepOptions) -> Result<SweepTable> {
    let mut unique: Vec<f64> = Vec::new();
    for &r in ratios {
        if !(r > 0.0 && r <= 1.0) {
            return Err(Error::InvalidParameter(format!("isoperimetric ratio {r} must lie in (0, 1]")));
        }
        if !unique.contains(&r) {
            unique.push(r);
        }
    }
    let params = EnergyParams::new(c0, 0.0, 0.0);
    params.validate()?;
    let run_row = |ratio: f64| -> Result<SweepRow> {
        let constraints = ConstraintSpec::from_ratio(opts.area, ratio)?;
        let (mesh0, initializer) = ratio_initializer(opts.level, opts.area, ratio)?;
        let mut mopts = opts.minimize.clone();
        mopts.checkpoint_every = None;
        let state = minimize(&mesh0, &params, Some(&constraints), &mopts)?;
        let last = state.final_energy().cloned().expect("history has the initial row");
        Ok(SweepRow {
            ratio,
            area_target: constraints.area,
            volume_target: constraints.volume,
            willmore: last.willmore,
            helfrich: last.helfrich,
            area: last.area,
            volume: last.volume,
            area_violation: last.area_violation,
            volume_violation: last.volume_violation,
            iterations: state.iteration,
            status: state.status,
            initializer,
        })
    };
    let rows: Vec<Result<SweepRow>> = match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Resource(e.to_string()))?;
            pool.install(|| unique.par_iter().map(|&r| run_row(r)).collect())
        }
        None => unique.par_iter().map(|&r| run_row(r)).collect(),
    };
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut by_ratio: Vec<&SweepRow> = rows.iter().collect();
    by_ratio.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
    let willmore_monotone = by_ratio.windows(2).all(|w| w[1].willmore <= w[0].willmore);
    Ok(SweepTable { c0, rows, willmore_monotone })
}
