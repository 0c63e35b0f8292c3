use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use helfrich::bubbling::{neck_family_study, strictly_decreasing, BubblingOptions};
use helfrich::conservation::{refinement_study, Patch};
use helfrich::elres::el_residual;
use helfrich::energy::{
    check_li_yau_embeddedness, check_willmore_helfrich_bound, check_willmore_lower_bound, energy_with_convention,
    epsilon_embeddedness, EmbeddingStatus,
};
use helfrich::generators::{gen_icosphere, perturb_vertices, MeshKind};
use helfrich::geometry::check_diameter_bound;
use helfrich::io::{load_mesh, save_mesh, save_ply_with_scalars};
use helfrich::optimize::{isoperimetric_sweep, minimize, ratio_initializer, resume, FlowStatus, SweepOptions};
use helfrich::report::Report;
use helfrich::topology::validate_topology;
use helfrich::variations::{fd_gradient_check, Functional, GradCheckConfig};
use helfrich::{vertex_geometry, EnergyParams, TriangleMesh};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{PatchChoice, RunConfig};
use crate::{CliError, Command, EnergyFlags, KindArg};

pub fn dispatch(command: Command, mut config: RunConfig) -> Result<(), CliError> {
    match command {
        Command::Gen { kind, level, axes, k, neck_samples, max_level, perturb, seed, output } => {
            let m = &mut config.mesh;
            if let Some(kind) = kind {
                m.kind = match kind {
                    KindArg::Icosphere => MeshKind::Icosphere,
                    KindArg::Ellipsoid => MeshKind::Ellipsoid,
                    KindArg::TwoSphereNeck => MeshKind::TwoSphereNeck,
                };
            }
            set(&mut m.level, level);
            set(&mut m.k, k);
            set(&mut m.neck_samples, neck_samples);
            set(&mut m.max_level, max_level);
            if let Some(a) = axes {
                m.axes = a.try_into().map_err(|a: Vec<f64>| CliError::Usage(format!("--axes takes three values, got {}", a.len())))?;
            }
            set(&mut config.gen.perturb, perturb);
            set(&mut config.gen.seed, seed);
            set_some(&mut config.output.mesh, output);
            gen(&config)
        }
        Command::Energy { mesh, energy, vertex_data } => {
            apply_energy(&mut config, &energy);
            set_some(&mut config.output.vertex_data, vertex_data);
            energy_cmd(&config, &mesh)
        }
        Command::Verify { mesh, energy, fd_trials, delta } => {
            apply_energy(&mut config, &energy);
            set(&mut config.verify.fd_trials, fd_trials);
            set_some(&mut config.verify.delta, delta);
            verify(&config, &mesh)
        }
        Command::Minimize {
            mesh,
            energy,
            area,
            volume,
            ratio,
            max_iterations,
            checkpoint_dir,
            checkpoint_every,
            resume,
            output,
            csv,
            vertex_data,
        } => {
            apply_energy(&mut config, &energy);
            if area.is_some() || volume.is_some() || ratio.is_some() {
                config.constraints.area = area.or(config.constraints.area);
                config.constraints.volume = volume;
                config.constraints.ratio = ratio;
            }
            set(&mut config.minimize.max_iterations, max_iterations);
            set_some(&mut config.minimize.checkpoint_dir, checkpoint_dir);
            set_some(&mut config.minimize.checkpoint_every, checkpoint_every);
            set_some(&mut config.output.mesh, output);
            set_some(&mut config.output.csv, csv);
            set_some(&mut config.output.vertex_data, vertex_data);
            minimize_cmd(&config, mesh.as_deref(), resume.as_deref())
        }
        Command::Sweep { ratios, c0, area, level, max_iterations, csv } => {
            set(&mut config.sweep.ratios, ratios);
            set(&mut config.energy.c0, c0);
            set(&mut config.sweep.area, area);
            set(&mut config.sweep.level, level);
            set(&mut config.minimize.max_iterations, max_iterations);
            set_some(&mut config.output.csv, csv);
            sweep(&config)
        }
        Command::Conservation { patch, factor, neck, resolutions, energy, csv } => {
            apply_energy(&mut config, &energy);
            let c = &mut config.conservation;
            set(&mut c.patch, patch);
            set(&mut c.factor, factor);
            set(&mut c.neck, neck);
            set(&mut c.resolutions, resolutions);
            set_some(&mut config.output.csv, csv);
            conservation(&config)
        }
        Command::Bubbles { c0, kmin, kmax, neck_samples, csv } => {
            set(&mut config.energy.c0, c0);
            set(&mut config.bubbles.kmin, kmin);
            set(&mut config.bubbles.kmax, kmax);
            set(&mut config.bubbles.neck_samples, neck_samples);
            set_some(&mut config.output.csv, csv);
            bubbles(&config)
        }
        Command::Config => {
            print_stdout(&config.to_toml()?)
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_some<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_energy(config: &mut RunConfig, flags: &EnergyFlags) {
    let e = &mut config.energy;
    set(&mut e.c0, flags.c0);
    set(&mut e.alpha, flags.alpha);
    set(&mut e.rho, flags.rho);
    if let Some(c) = flags.volume_convention {
        e.volume_convention = c.into();
    }
    config.minimize.volume_convention = e.volume_convention;
}

fn validated_params(config: &RunConfig) -> Result<EnergyParams, CliError> {
    let p = config.energy.params();
    p.validate()?;
    Ok(p)
}

fn inputs(config: &RunConfig, command: &str, extra: Value) -> Result<Value, CliError> {
    Ok(json!({
        "command": command,
        "config": serde_json::to_value(config).map_err(helfrich::Error::from)?,
        "arguments": extra,
    }))
}

fn emit(config: &RunConfig, report: &Report) -> Result<(), CliError> {
    let text = report.to_json()?;
    write_or_print(config.output.report.as_deref(), &text)
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p != Path::new("-") => std::fs::write(p, text)?,
        _ => print_stdout(&format!("{text}\n"))?,
    }
    Ok(())
}

/// Writes to stdout, treating a closed pipe as success.
fn print_stdout(text: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn to_value<T: Serialize>(value: &T) -> Result<Value, CliError> {
    Ok(serde_json::to_value(value).map_err(helfrich::Error::from)?)
}

/// Loads a mesh and requires a closed, consistently oriented sphere.
fn load_sphere(path: &Path) -> Result<TriangleMesh, CliError> {
    let mesh = load_mesh(path)?;
    let t = validate_topology(&mesh);
    if !t.pass {
        return Err(helfrich::Error::InvalidMesh(format!(
            "{} is not a closed oriented genus-0 surface (χ = {}, boundary edges {}, non-manifold edges {}, degenerate faces {})",
            path.display(),
            t.euler_characteristic,
            t.boundary_edges,
            t.nonmanifold_edges,
            t.degenerate_faces
        ))
        .into());
    }
    Ok(mesh)
}

fn gen(config: &RunConfig) -> Result<(), CliError> {
    let Some(out) = &config.output.mesh else {
        return Err(CliError::Usage("gen needs an output path (-o or [output] mesh)".into()));
    };
    let mut mesh = config.mesh.generate()?;
    if config.gen.perturb > 0.0 {
        mesh = perturb_vertices(&mesh, config.gen.perturb, config.gen.seed)?;
    }
    save_mesh(&mesh, out)?;
    let t = validate_topology(&mesh);
    let values = json!({
        "path": out,
        "vertices": mesh.num_vertices(),
        "faces": mesh.num_faces(),
        "topology": to_value(&t)?,
    });
    let report = Report::new("gen", inputs(config, "gen", Value::Null)?, values, t.pass, Value::Null);
    emit(config, &report)
}

fn vertex_fields(mesh: &TriangleMesh, params: &EnergyParams, path: &Path) -> Result<(), CliError> {
    let g = vertex_geometry(mesh)?;
    let gauss: Vec<f64> = (0..g.len()).map(|i| g.gauss_curvature(i)).collect();
    let ii: Vec<f64> = (0..g.len()).map(|i| g.second_fundamental_sq(i)).collect();
    let residual = el_residual(mesh, params)?.magnitudes();
    save_ply_with_scalars(
        mesh,
        &[
            ("mean_curvature", &g.mean_curvature),
            ("gauss_curvature", &gauss),
            ("second_fundamental_sq", &ii),
            ("vertex_area", &g.area),
            ("el_residual", &residual),
        ],
        path,
    )?;
    Ok(())
}

fn energy_cmd(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let params = validated_params(config)?;
    let mesh = load_sphere(path)?;
    let e = energy_with_convention(&mesh, &params, config.energy.volume_convention)?;
    let residual = el_residual(&mesh, &params).map(|r| r.norm).ok();
    if let Some(out) = &config.output.vertex_data {
        vertex_fields(&mesh, &params, out)?;
    }
    let values = json!({
        "energy": to_value(&e)?,
        "willmore_over_4pi": e.willmore / (4.0 * PI),
        "el_residual_norm": residual,
        "vertices": mesh.num_vertices(),
        "faces": mesh.num_faces(),
    });
    let report = Report::new("energy", inputs(config, "energy", json!({ "mesh": path }))?, values, true, Value::Null);
    emit(config, &report)
}

/// Willmore deficit of the icosphere whose vertex count is closest to `n`.
fn reference_deficit(n: usize) -> Result<(u32, f64), CliError> {
    let level = (0..=7u32)
        .min_by_key(|&l| (10 * 4usize.pow(l) + 2).abs_diff(n))
        .expect("non-empty range");
    let w = helfrich::energy(&gen_icosphere(level)?, &EnergyParams::willmore())?.willmore;
    Ok((level, (1.0 - w / (4.0 * PI)).max(0.0)))
}

#[derive(Serialize)]
struct Check {
    name: String,
    pass: bool,
    /// False when the check's hypotheses do not hold for this mesh.
    applicable: bool,
    detail: Value,
}

fn check(name: &str, pass: bool, detail: Value) -> Check {
    Check { name: name.into(), pass, applicable: true, detail }
}

fn verify(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let params = validated_params(config)?;
    let v = config.verify;
    let mesh = load_mesh(path)?;
    let mut checks = Vec::new();

    let topo = validate_topology(&mesh);
    let topo_ok = topo.pass && topo.euler_characteristic == 2;
    checks.push(check("topology", topo_ok, to_value(&topo)?));
    if !topo_ok {
        return finish_verify(config, path, checks);
    }

    let g = vertex_geometry(&mesh)?;
    let total: f64 = g.angle_defect.iter().sum();
    let gb_err = (total - 4.0 * PI).abs();
    checks.push(check(
        "gauss_bonnet",
        gb_err <= v.gauss_bonnet_tolerance,
        json!({ "total_curvature": total, "error": gb_err, "tolerance": v.gauss_bonnet_tolerance }),
    ));

    let e = helfrich::energy(&mesh, &params)?;
    let defect = e.expansion_defect();
    checks.push(check("helfrich_expansion", defect <= 1e-10, json!({ "relative_defect": defect, "tolerance": 1e-10 })));

    let gc = GradCheckConfig { trials: v.fd_trials, seed: v.fd_seed, tolerance: v.fd_tolerance, ..Default::default() };
    let functionals = [
        Functional::Area,
        Functional::Volume,
        Functional::RawFlux,
        Functional::TotalMeanCurvature,
        Functional::Willmore,
        Functional::Helfrich,
    ];
    let fd: Vec<_> = functionals
        .par_iter()
        .map(|&f| fd_gradient_check(&mesh, f, &params, &gc).map(|r| (f, r)))
        .collect::<Result<_, _>>()?;
    for (f, r) in fd {
        checks.push(check(
            &format!("gradient_{}", f.name()),
            r.pass,
            json!({ "max_relative_error": r.max_relative_error, "tolerance": r.tolerance, "trials": r.trials }),
        ));
    }

    let d = check_diameter_bound(&mesh)?;
    checks.push(check("diameter_bound", d.pass, to_value(&d)?));

    let wh = check_willmore_helfrich_bound(&mesh, params.c0, e.area)?;
    checks.push(check("willmore_helfrich_bound", wh.pass, to_value(&wh)?));

    let (level, auto_delta) = reference_deficit(mesh.num_vertices())?;
    let delta = v.delta.unwrap_or(auto_delta);
    let lb = check_willmore_lower_bound(&mesh, delta)?;
    let mut detail = to_value(&lb)?;
    detail["delta"] = json!(delta);
    if v.delta.is_none() {
        detail["delta_reference_level"] = json!(level);
    }
    checks.push(check("willmore_lower_bound", lb.pass, detail));

    let ly = check_li_yau_embeddedness(&mesh, 1e-9)?;
    let applicable = ly.status != EmbeddingStatus::AboveThreshold;
    checks.push(Check {
        name: "li_yau_embeddedness".into(),
        pass: ly.status != EmbeddingStatus::Inconsistent,
        applicable,
        detail: to_value(&ly)?,
    });

    finish_verify(config, path, checks)
}

fn finish_verify(config: &RunConfig, path: &Path, checks: Vec<Check>) -> Result<(), CliError> {
    let pass = checks.iter().all(|c| c.pass);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let v = config.verify;
    let tolerances = json!({
        "gauss_bonnet": v.gauss_bonnet_tolerance,
        "gradient": v.fd_tolerance,
        "fd_trials": v.fd_trials,
    });
    let values = json!({ "checks": to_value(&checks)? });
    let report = Report::new("verify", inputs(config, "verify", json!({ "mesh": path }))?, values, pass, tolerances);
    emit(config, &report)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::ChecksFailed(failed.join(", ")))
    }
}

fn minimize_cmd(config: &RunConfig, mesh_path: Option<&Path>, resume_dir: Option<&Path>) -> Result<(), CliError> {
    let params = validated_params(config)?;
    let constraints = config.constraints.resolve()?;
    let opts = &config.minimize;
    let state = match resume_dir {
        Some(dir) => resume(dir, opts)?,
        None => {
            let start = match (mesh_path, constraints) {
                (Some(p), _) => load_sphere(p)?,
                // a sphere projected onto a small ratio starts crumpled, so
                // constrained runs begin from a spheroid of the right shape
                (None, Some(c)) => ratio_initializer(config.mesh.level, c.area, c.isoperimetric_ratio())?.0,
                (None, None) => config.mesh.generate()?,
            };
            minimize(&start, &params, constraints.as_ref(), opts)?
        }
    };
    if let Some(out) = &config.output.mesh {
        save_mesh(&state.mesh, out)?;
    }
    if let Some(out) = &config.output.csv {
        std::fs::write(out, state.history_csv()?)?;
    }
    if let Some(out) = &config.output.vertex_data {
        vertex_fields(&state.mesh, &state.params, out)?;
    }

    let last = state.final_energy().cloned();
    let constraints_met = state.violations.iter().all(|v| v.abs() <= opts.constraint_tol);
    let ly = check_li_yau_embeddedness(&state.mesh, 1e-9)?;
    // the optimiser's best Willmore value stands in for the infimum over the class
    let epsilon = match (state.constraints, &last) {
        (Some(c), Some(row)) => match epsilon_embeddedness(c.area, c.volume, row.willmore) {
            Ok(eps) => json!({
                "epsilon": eps,
                "inf_willmore": row.willmore,
                "c0_below_epsilon": state.params.c0.abs() < eps,
                "embedded": ly.intersections.embedded,
            }),
            Err(e) => json!({ "unavailable": e.to_string() }),
        },
        _ => Value::Null,
    };
    let quality = discretization_quality(&state.mesh)?;
    let pass = constraints_met && quality.willmore_lower_bound.pass;
    let values = json!({
        "status": state.status,
        "iterations": state.iteration,
        "final": last,
        "violations": state.violations,
        "constraints_met": constraints_met,
        "multipliers": state.multipliers,
        "multiplier_estimates": state.multiplier_estimates(),
        "least_squares_alpha_rho": state.multiplier_estimate,
        "li_yau": to_value(&ly)?,
        "epsilon_embeddedness": epsilon,
        "bubbling": state.bubbling,
        "flips": state.flips,
        "line_search_failures": state.line_search_failures,
        "discretization": to_value(&quality)?,
    });
    let args = json!({ "mesh": mesh_path, "resume": resume_dir });
    let tolerances = json!({ "constraint": opts.constraint_tol, "gtol_rel": opts.gtol_rel });
    let report = Report::new("minimize", inputs(config, "minimize", args)?, values, pass, tolerances);
    emit(config, &report)?;
    match state.status {
        FlowStatus::Collapsed | FlowStatus::LineSearchFailed => {
            Err(CliError::Numerical(format!("flow stopped with status {:?} at iteration {}", state.status, state.iteration)))
        }
        _ => Ok(()),
    }
}

/// Signs that a flow has found a mesh artefact rather than a surface: the
/// scalar energy only sees n·Hvec, so a crumpled mesh can push the discrete
/// Willmore energy below 4π while Hvec turns tangential.
#[derive(Serialize)]
struct DiscretizationQuality {
    /// Σ A|Hvec − (n·Hvec)n|² / Σ A|Hvec|².
    tangential_fraction: f64,
    willmore_lower_bound: helfrich::geometry::InequalityReport,
    delta_reference_level: u32,
}

fn discretization_quality(mesh: &TriangleMesh) -> Result<DiscretizationQuality, CliError> {
    let g = vertex_geometry(mesh)?;
    let (mut tangential, mut total) = (0.0, 0.0);
    for i in 0..g.len() {
        let h = g.hvec[i];
        tangential += g.area[i] * (h - g.normal[i] * g.mean_curvature[i]).norm_squared();
        total += g.area[i] * h.norm_squared();
    }
    let (level, delta) = reference_deficit(mesh.num_vertices())?;
    Ok(DiscretizationQuality {
        tangential_fraction: tangential / total.max(f64::MIN_POSITIVE),
        willmore_lower_bound: check_willmore_lower_bound(mesh, delta)?,
        delta_reference_level: level,
    })
}

fn sweep(config: &RunConfig) -> Result<(), CliError> {
    let s = &config.sweep;
    let opts = SweepOptions { area: s.area, level: s.level, minimize: config.minimize.clone(), threads: s.threads };
    let table = isoperimetric_sweep(&s.ratios, config.energy.c0, &opts)?;
    if let Some(out) = &config.output.csv {
        std::fs::write(out, table.to_csv()?)?;
    }
    let tol = config.minimize.constraint_tol;
    let pass = table.rows.iter().all(|r| r.area_violation.abs() <= tol && r.volume_violation.abs() <= tol);
    let report = Report::new("sweep", inputs(config, "sweep", Value::Null)?, to_value(&table)?, pass, json!({ "constraint": tol }));
    emit(config, &report)
}

fn conservation(config: &RunConfig) -> Result<(), CliError> {
    let params = validated_params(config)?;
    let c = &config.conservation;
    let patch = match c.patch {
        PatchChoice::Critical => Patch::critical_cap(&params)?,
        PatchChoice::OffCritical => Patch::off_critical_cap(&params, c.factor)?,
        PatchChoice::Catenoid => Patch::Catenoid { neck: c.neck },
        PatchChoice::Plane => Patch::Plane,
    };
    let study = refinement_study(&patch, &params, &c.resolutions)?;
    if let Some(out) = &config.output.csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = ["n", "h", "residual_r", "residual_s", "residual_y", "residual_phi", "gradient_l", "gradient_r", "gradient_s", "max_solver_residual"];
        w.write_record(header).map_err(csv_error)?;
        for r in &study.reports {
            let [a, b, y, phi] = r.residuals.as_array();
            let g = &r.gradient_residuals;
            let mut row = vec![r.n.to_string()];
            row.extend([r.h, a, b, y, phi, g.l, g.r, g.s, r.max_solver_residual].iter().map(|x| format!("{x:.16e}")));
            w.write_record(&row).map_err(csv_error)?;
        }
        std::fs::write(out, w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?)?;
    }
    let pass = study.all_converge(c.min_order);
    let values = json!({ "patch": patch.label(), "study": to_value(&study)? });
    let report = Report::new("conservation", inputs(config, "conservation", Value::Null)?, values, pass, json!({ "min_order": c.min_order }));
    emit(config, &report)
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Lib(helfrich::Error::Serialization(e.to_string()))
}

fn bubbles(config: &RunConfig) -> Result<(), CliError> {
    let b = config.bubbles;
    if b.kmin < 2 || b.kmax < b.kmin {
        return Err(CliError::Usage(format!("need 2 ≤ kmin ≤ kmax, got kmin = {}, kmax = {}", b.kmin, b.kmax)));
    }
    let ks: Vec<u32> = (b.kmin..=b.kmax).collect();
    let rows = neck_family_study(config.energy.c0, &ks, b.neck_samples, &BubblingOptions::default())?;

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "helfrich", "willmore", "area", "volume"]).map_err(csv_error)?;
    for r in &rows {
        let f = |x: f64| format!("{x:.16e}");
        w.write_record([r.k.to_string(), f(r.helfrich), f(r.willmore), f(r.area), f(r.volume)]).map_err(csv_error)?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?).expect("csv output is UTF-8");
    match &config.output.csv {
        Some(p) => std::fs::write(p, &text)?,
        None => print_stdout(&text)?,
    }

    let helfrich: Vec<f64> = rows.iter().map(|r| r.helfrich).collect();
    let decreasing = strictly_decreasing(&helfrich);
    let values = json!({ "rows": to_value(&rows)?, "helfrich_strictly_decreasing": decreasing });
    let report = Report::new("bubbles", inputs(config, "bubbles", Value::Null)?, values, decreasing, Value::Null);
    // with the CSV on stdout the report is only written when a path is given
    if config.output.csv.is_some() || config.output.report.is_some() {
        emit(config, &report)?;
    }
    Ok(())
}
