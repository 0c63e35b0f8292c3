//! Python bindings. Meshes are exposed as a `Mesh` class; reports come back
//! as plain dicts decoded from the library's JSON.

use helfrich::bubbling::{neck_family_study, BubblingOptions};
use helfrich::conservation::{refinement_study, Patch};
use helfrich::elres::el_residual;
use helfrich::energy::{check_li_yau_embeddedness, energy_with_convention, epsilon_embeddedness};
use helfrich::generators::{gen_ellipsoid, gen_icosphere, gen_two_sphere_neck, perturb_vertices};
use helfrich::geometry::{diameter, enclosed_volume, total_area};
use helfrich::io::{load_mesh, save_mesh};
use helfrich::optimize::{minimize as run_minimize, ConstraintSpec, MinimizeOptions};
use helfrich::sphere_family::critical_radius as sphere_critical_radius;
use helfrich::topology::validate_topology;
use helfrich::variations::{fd_gradient_check, gradient as discrete_gradient, GradCheckConfig};
use helfrich::{EnergyParams, Functional, TriangleMesh, Vec3, VolumeConvention};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

create_exception!(helfrich_py, NumericalError, PyException, "A numerical procedure broke down.");

fn to_py(e: helfrich::Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn params(c0: f64, alpha: f64, rho: f64) -> PyResult<EnergyParams> {
    let p = EnergyParams::new(c0, alpha, rho);
    p.validate().map_err(to_py)?;
    Ok(p)
}

fn convention(name: &str) -> PyResult<VolumeConvention> {
    match name {
        "flux" => Ok(VolumeConvention::Flux),
        "geometric" => Ok(VolumeConvention::Geometric),
        other => Err(PyValueError::new_err(format!("unknown volume convention {other:?}"))),
    }
}

#[pyclass(frozen, skip_from_py_object, module = "helfrich_py")]
#[derive(Clone)]
pub struct Mesh {
    inner: TriangleMesh,
}

#[pymethods]
impl Mesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> PyResult<Self> {
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&v| v >= n)) {
            return Err(PyValueError::new_err(format!("face {f:?} references a missing vertex")));
        }
        let vertices = vertices.into_iter().map(Vec3::from).collect();
        Ok(Self { inner: TriangleMesh::new(vertices, faces) })
    }

    #[staticmethod]
    fn icosphere(level: u32) -> PyResult<Self> {
        gen_icosphere(level).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn ellipsoid(level: u32, a: f64, b: f64, c: f64) -> PyResult<Self> {
        gen_ellipsoid(level, a, b, c).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (k, neck_samples = 64))]
    fn two_sphere_neck(k: u32, neck_samples: usize) -> PyResult<Self> {
        gen_two_sphere_neck(k, neck_samples).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        load_mesh(path).map(|inner| Self { inner }).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_mesh(&self.inner, path).map_err(to_py)
    }

    #[getter]
    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner.vertices.iter().map(|v| [v.x, v.y, v.z]).collect()
    }

    #[getter]
    fn faces(&self) -> Vec<[usize; 3]> {
        self.inner.faces.clone()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_faces(&self) -> usize {
        self.inner.num_faces()
    }

    fn scaled(&self, factor: f64) -> Self {
        Self { inner: self.inner.scaled(factor) }
    }

    fn translated(&self, offset: [f64; 3]) -> Self {
        Self { inner: self.inner.translated(&Vec3::from(offset)) }
    }

    fn perturbed(&self, amplitude: f64, seed: u64) -> PyResult<Self> {
        perturb_vertices(&self.inner, amplitude, seed).map(|inner| Self { inner }).map_err(to_py)
    }

    fn area(&self) -> f64 {
        total_area(&self.inner)
    }

    fn volume(&self) -> f64 {
        enclosed_volume(&self.inner).volume
    }

    fn diameter(&self) -> f64 {
        diameter(&self.inner)
    }

    fn topology<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &validate_topology(&self.inner))
    }

    /// Energy breakdown: willmore, helfrich, cross, area, raw_flux, volume, general.
    #[pyo3(signature = (c0 = 0.0, alpha = 0.0, rho = 0.0, volume_convention = "flux"))]
    fn energy<'py>(&self, py: Python<'py>, c0: f64, alpha: f64, rho: f64, volume_convention: &str) -> PyResult<Bound<'py, PyAny>> {
        let e = energy_with_convention(&self.inner, &params(c0, alpha, rho)?, convention(volume_convention)?).map_err(to_py)?;
        to_dict(py, &e)
    }

    /// Exact per-vertex gradient of one of: area, volume, raw_flux,
    /// total_mean_curvature, willmore, helfrich.
    #[pyo3(signature = (functional, c0 = 0.0, alpha = 0.0, rho = 0.0))]
    fn gradient(&self, functional: &str, c0: f64, alpha: f64, rho: f64) -> PyResult<Vec<[f64; 3]>> {
        let f = Functional::parse(functional).ok_or_else(|| PyValueError::new_err(format!("unknown functional {functional:?}")))?;
        let g = discrete_gradient(&self.inner, f, &params(c0, alpha, rho)?).map_err(to_py)?;
        Ok(g.values.iter().map(|v| [v.x, v.y, v.z]).collect())
    }

    #[pyo3(signature = (functional, c0 = 0.0, alpha = 0.0, rho = 0.0, trials = 10, seed = 7))]
    #[allow(clippy::too_many_arguments)]
    fn gradient_check<'py>(
        &self,
        py: Python<'py>,
        functional: &str,
        c0: f64,
        alpha: f64,
        rho: f64,
        trials: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let f = Functional::parse(functional).ok_or_else(|| PyValueError::new_err(format!("unknown functional {functional:?}")))?;
        let config = GradCheckConfig { trials, seed, ..Default::default() };
        let r = fd_gradient_check(&self.inner, f, &params(c0, alpha, rho)?, &config).map_err(to_py)?;
        to_dict(py, &r)
    }

    /// Norm of the discrete Euler-Lagrange residual.
    #[pyo3(signature = (c0 = 0.0, alpha = 0.0, rho = 0.0))]
    fn el_residual(&self, c0: f64, alpha: f64, rho: f64) -> PyResult<f64> {
        el_residual(&self.inner, &params(c0, alpha, rho)?).map(|r| r.norm).map_err(to_py)
    }

    fn li_yau<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &check_li_yau_embeddedness(&self.inner, 1e-9).map_err(to_py)?)
    }

    fn __repr__(&self) -> String {
        format!("Mesh(vertices={}, faces={})", self.inner.num_vertices(), self.inner.num_faces())
    }
}

/// Runs the constrained flow; returns (final mesh, summary dict). The
/// summary holds the status, iteration count, violations, multipliers and
/// the full energy history.
#[pyfunction]
#[pyo3(signature = (mesh, c0 = 0.0, alpha = 0.0, rho = 0.0, area = None, volume = None, max_iterations = 50_000))]
#[allow(clippy::too_many_arguments)]
fn minimize<'py>(
    py: Python<'py>,
    mesh: &Mesh,
    c0: f64,
    alpha: f64,
    rho: f64,
    area: Option<f64>,
    volume: Option<f64>,
    max_iterations: usize,
) -> PyResult<(Mesh, Bound<'py, PyAny>)> {
    let p = params(c0, alpha, rho)?;
    let constraints = match (area, volume) {
        (Some(a), Some(v)) => Some(ConstraintSpec::new(a, v).map_err(to_py)?),
        (None, None) => None,
        _ => return Err(PyValueError::new_err("give both area and volume, or neither")),
    };
    let opts = MinimizeOptions { max_iterations, ..Default::default() };
    let start = mesh.inner.clone();
    let state = py.detach(|| run_minimize(&start, &p, constraints.as_ref(), &opts)).map_err(to_py)?;
    let summary = to_dict(py, &state)?;
    Ok((Mesh { inner: state.mesh }, summary))
}

/// Energies of the two-sphere neck family for k in [kmin, kmax].
#[pyfunction]
#[pyo3(signature = (c0 = 1.0, kmin = 2, kmax = 12, neck_samples = 64))]
fn neck_family<'py>(py: Python<'py>, c0: f64, kmin: u32, kmax: u32, neck_samples: usize) -> PyResult<Bound<'py, PyAny>> {
    let ks: Vec<u32> = (kmin..=kmax).collect();
    let rows = py.detach(|| neck_family_study(c0, &ks, neck_samples, &BubblingOptions::default())).map_err(to_py)?;
    to_dict(py, &rows)
}

/// Grid-refinement study of the conservation residuals on a sphere cap
/// (`critical` or `off_critical`), a `plane` or a `catenoid`.
#[pyfunction]
#[pyo3(signature = (c0, alpha, rho, patch = "critical", resolutions = vec![65, 129], factor = 1.1, neck = 0.7))]
#[allow(clippy::too_many_arguments)]
fn conservation_study<'py>(
    py: Python<'py>,
    c0: f64,
    alpha: f64,
    rho: f64,
    patch: &str,
    resolutions: Vec<usize>,
    factor: f64,
    neck: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let p = params(c0, alpha, rho)?;
    let patch = match patch {
        "critical" => Patch::critical_cap(&p).map_err(to_py)?,
        "off_critical" => Patch::off_critical_cap(&p, factor).map_err(to_py)?,
        "plane" => Patch::Plane,
        "catenoid" => Patch::Catenoid { neck },
        other => return Err(PyValueError::new_err(format!("unknown patch {other:?}"))),
    };
    let study = py.detach(|| refinement_study(&patch, &p, &resolutions)).map_err(to_py)?;
    to_dict(py, &study)
}

/// Critical radius of the round-sphere family for (c0, alpha, rho).
#[pyfunction]
#[pyo3(signature = (c0, alpha = 0.0, rho = 0.0))]
fn critical_radius(c0: f64, alpha: f64, rho: f64) -> PyResult<f64> {
    sphere_critical_radius(&params(c0, alpha, rho)?).map_err(to_py)
}

#[pyfunction(name = "epsilon_embeddedness")]
fn epsilon(a0: f64, v0: f64, inf_willmore: f64) -> PyResult<f64> {
    epsilon_embeddedness(a0, v0, inf_willmore).map_err(to_py)
}

#[pymodule]
fn helfrich_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds the classes and functions to `m`; also used to embed the module.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mesh>()?;
    m.add_function(wrap_pyfunction!(minimize, m)?)?;
    m.add_function(wrap_pyfunction!(neck_family, m)?)?;
    m.add_function(wrap_pyfunction!(conservation_study, m)?)?;
    m.add_function(wrap_pyfunction!(critical_radius, m)?)?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
