//! Python bindings: meshes, permittivity models, single eigenvalue solves,
//! full experiment runs and the invariant checks.

use std::path::PathBuf;

use photonic_eig::assembly::BlochVector;
use photonic_eig::dispersion::{porous_silicon, two_term_lorentz, DispersionModel, LorentzTerm};
use photonic_eig::driver::{self, Experiment, RunConfig};
use photonic_eig::mesh::{build_mesh, PeriodicMesh};
use photonic_eig::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Config(_) | Error::WrongModel { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Periodic Q2 mesh of the unit cell at a refinement level.
#[pyclass(name = "Mesh", frozen)]
struct PyMesh {
    inner: PeriodicMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(level: u32) -> PyResult<Self> {
        Ok(PyMesh { inner: build_mesh(level).map_err(to_py)? })
    }

    #[getter]
    fn level(&self) -> u32 {
        self.inner.level()
    }

    #[getter]
    fn dofs(&self) -> usize {
        self.inner.dof_count()
    }

    #[getter]
    fn cells_per_side(&self) -> usize {
        self.inner.cells_per_side()
    }

    #[getter]
    fn cell_size(&self) -> f64 {
        self.inner.cell_size()
    }

    /// Coordinates of every free degree of freedom.
    fn dof_points(&self) -> Vec<(f64, f64)> {
        (0..self.inner.dof_count())
            .map(|d| {
                let p = self.inner.dof_point(d);
                (p[0], p[1])
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!("Mesh(level={}, dofs={})", self.inner.level(), self.inner.dof_count())
    }
}

/// Inclusion permittivity model.
#[pyclass(name = "Dispersion", frozen)]
struct PyDispersion {
    inner: DispersionModel,
}

fn terms(list: Vec<(f64, f64, f64)>) -> Vec<LorentzTerm> {
    list.into_iter().map(|(xi2, eta2, gamma)| LorentzTerm::new(xi2, eta2, gamma)).collect()
}

#[pymethods]
impl PyDispersion {
    #[staticmethod]
    fn constant(value: f64) -> Self {
        PyDispersion { inner: DispersionModel::constant(value) }
    }

    /// Lossless Lorentz model from `(xi2, eta2)` pairs.
    #[staticmethod]
    fn simplified_dl(alpha: f64, terms: Vec<(f64, f64)>) -> PyResult<Self> {
        let t = terms.into_iter().map(|(x, e)| LorentzTerm::lossless(x, e)).collect();
        Ok(PyDispersion { inner: DispersionModel::simplified_dl(alpha, t).map_err(to_py)? })
    }

    /// Real part of the damped model from `(xi2, eta2, gamma)` triples.
    #[staticmethod]
    fn real_dl(alpha: f64, terms: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        Ok(PyDispersion { inner: DispersionModel::real_dl(alpha, self::terms(terms)).map_err(to_py)? })
    }

    #[staticmethod]
    fn two_term_lorentz() -> Self {
        PyDispersion { inner: two_term_lorentz() }
    }

    #[staticmethod]
    fn porous_silicon() -> Self {
        PyDispersion { inner: porous_silicon() }
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    /// Permittivity at angular frequency `omega`.
    fn eval(&self, omega: f64) -> PyResult<f64> {
        self.inner.eval(omega).map_err(to_py)
    }

    /// Permittivity as a function of `lambda = omega^2`.
    fn eval_sq(&self, lambda: f64) -> PyResult<f64> {
        self.inner.eval_sq(lambda).map_err(to_py)
    }

    /// Derivative with respect to `lambda`.
    fn deriv_sq(&self, lambda: f64) -> PyResult<f64> {
        self.inner.deriv_sq(lambda).map_err(to_py)
    }

    /// Poles in `lambda`.
    fn poles(&self) -> Vec<f64> {
        self.inner.poles()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Smallest eigenvalue `lambda_1(k)` for a constant inclusion permittivity.
#[pyfunction]
#[pyo3(signature = (kx, ky, eps2 = 1.0, level = 2, tol = 1e-10))]
fn smallest_eigenvalue(py: Python<'_>, kx: f64, ky: f64, eps2: f64, level: u32, tol: f64) -> PyResult<f64> {
    let mut cfg = RunConfig::new(Experiment::KSweep);
    cfg.model = DispersionModel::constant(eps2);
    cfg.tol = tol;
    cfg.validate().map_err(to_py)?;
    py.detach(|| {
        let mesh = build_mesh(level)?;
        driver::smallest_eigenvalue(&cfg, &mesh, BlochVector::new(kx, ky))
    })
    .map_err(to_py)
}

/// Lowest free-space band `min |k + 2 pi n|^2`.
#[pyfunction]
fn free_space_band(kx: f64, ky: f64) -> f64 {
    driver::free_space_band(BlochVector::new(kx, ky))
}

fn load_config(config: &str, is_path: bool) -> PyResult<RunConfig> {
    if is_path {
        RunConfig::from_file(&PathBuf::from(config)).map_err(to_py)
    } else {
        RunConfig::from_toml(config).map_err(to_py)
    }
}

/// Runs an experiment from TOML text (or a file when `is_path` is true).
///
/// Returns a dict with the trace rows, the convergence flag, the final
/// level, the failure message and the reference eigenvalue if computed.
#[pyfunction]
#[pyo3(signature = (config, is_path = false))]
fn run_experiment<'py>(py: Python<'py>, config: &str, is_path: bool) -> PyResult<Bound<'py, PyDict>> {
    let cfg = load_config(config, is_path)?;
    let (out, reference) = py
        .detach(|| -> photonic_eig::Result<_> {
            let reference = if cfg.reference.enabled { Some(driver::compute_reference(&cfg)?) } else { None };
            let mut out = driver::run_schedule(&cfg)?;
            if let Some(r) = &reference {
                out.trace.set_reference(r.mu_ref);
            }
            Ok((out, reference))
        })
        .map_err(to_py)?;
    let rows = out
        .trace
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("j", r.j)?;
            d.set_item("mesh_level", r.mesh_level)?;
            d.set_item("dofs", r.dofs)?;
            d.set_item("mu", r.mu)?;
            d.set_item("lambda", r.lambda)?;
            d.set_item("rel_err", r.rel_err)?;
            d.set_item("residual_dual", r.residual_dual)?;
            d.set_item("wall_seconds", r.wall_seconds)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    let d = PyDict::new(py);
    d.set_item("rows", rows)?;
    d.set_item("converged", out.converged)?;
    d.set_item("final_level", out.final_level)?;
    d.set_item("failure", out.trace.failure.clone())?;
    d.set_item("lambda_ref", reference.map(|r| r.lambda_ref))?;
    Ok(d)
}

/// Smallest eigenvalue at each point of the configured wave-vector path, as
/// `(kx, ky, lambda1)` tuples with `None` for failed points.
#[pyfunction]
#[pyo3(signature = (config, is_path = false))]
fn k_sweep(py: Python<'_>, config: &str, is_path: bool) -> PyResult<Vec<(f64, f64, Option<f64>)>> {
    let cfg = load_config(config, is_path)?;
    let rows = py
        .detach(|| {
            let path = cfg.sweep_points()?;
            driver::k_sweep(&cfg, &path)
        })
        .map_err(to_py)?;
    Ok(rows.into_iter().map(|r| (r.kx, r.ky, r.lambda1)).collect())
}

/// Runs the built-in invariant checks as `(name, passed, detail)` tuples.
#[pyfunction]
fn run_checks(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(driver::checks::run_checks)
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail))
        .collect()
}

#[pymodule]
fn photonic_eig_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMesh>()?;
    m.add_class::<PyDispersion>()?;
    m.add_function(wrap_pyfunction!(smallest_eigenvalue, m)?)?;
    m.add_function(wrap_pyfunction!(free_space_band, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(k_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_checks, m)?)?;
    Ok(())
}
