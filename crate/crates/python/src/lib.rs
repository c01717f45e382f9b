//! Python bindings for the `scale_probe` kernel and harness.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use scale_probe::fespace::{build_space, LagrangeSpace};
use scale_probe::harness::{self, Experiment, ExperimentConfig};
use scale_probe::mesh::{build_mesh, Rect, StructuredMesh, SubdomainSpec};
use scale_probe::scaling::{self, CutoffFunction, EpsilonParams};

fn err(e: scale_probe::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rect(r: (f64, f64, f64, f64)) -> PyResult<Rect> {
    Rect::new(r.0, r.1, r.2, r.3).map_err(err)
}

/// Structured triangulation of the unit square with `n x n` squares.
#[pyclass(frozen)]
struct Mesh {
    inner: Arc<StructuredMesh>,
}

#[pymethods]
impl Mesh {
    #[new]
    fn new(n: usize) -> PyResult<Self> {
        Ok(Mesh { inner: Arc::new(build_mesh(Rect::unit(), n).map_err(err)?) })
    }

    #[getter]
    fn mesh_size(&self) -> f64 {
        self.inner.mesh_size()
    }

    #[getter]
    fn num_cells(&self) -> usize {
        self.inner.num_cells()
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    /// Region `p` layers inside the rectangle `(xmin, ymin, xmax, ymax)`.
    fn shrink(&self, region: (f64, f64, f64, f64), layers: usize) -> PyResult<(f64, f64, f64, f64)> {
        let s = self.inner.shrink_by_layers(&SubdomainSpec::new(rect(region)?), layers).map_err(err)?;
        Ok((s.region.xmin, s.region.ymin, s.region.xmax, s.region.ymax))
    }
}

/// Lagrange space of degree 1 or 2 on a [`Mesh`].
#[pyclass(frozen)]
struct Space {
    inner: Arc<LagrangeSpace>,
}

#[pymethods]
impl Space {
    #[new]
    fn new(mesh: &Mesh, r: usize) -> PyResult<Self> {
        Ok(Space { inner: build_space(mesh.inner.clone(), r).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    fn interior_dofs(&self, region: (f64, f64, f64, f64)) -> PyResult<Vec<usize>> {
        self.inner.interior_dofs(&SubdomainSpec::new(rect(region)?)).map_err(err)
    }

    fn dofs_in(&self, region: (f64, f64, f64, f64)) -> PyResult<Vec<usize>> {
        self.inner.dofs_in(&SubdomainSpec::new(rect(region)?)).map_err(err)
    }
}

/// C^2 cutoff equal to 1 on `plateau` and 0 outside `support`.
#[pyclass(frozen)]
struct Cutoff {
    inner: CutoffFunction,
}

#[pymethods]
impl Cutoff {
    #[new]
    fn new(plateau: (f64, f64, f64, f64), support: (f64, f64, f64, f64)) -> PyResult<Self> {
        Ok(Cutoff { inner: scaling::build_cutoff(rect(plateau)?, rect(support)?).map_err(err)? })
    }

    #[getter]
    fn derivative_bound(&self) -> f64 {
        self.inner.derivative_bound()
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        use scale_probe::fespace::ScalarField;
        self.inner.value([x, y])
    }

    fn gradient(&self, x: f64, y: f64) -> (f64, f64) {
        use scale_probe::fespace::ScalarField;
        let g = self.inner.gradient([x, y]).unwrap_or([f64::NAN; 2]);
        (g[0], g[1])
    }
}

#[pyfunction]
fn epsilon(d: f64, h: f64, r: usize) -> PyResult<f64> {
    scaling::epsilon(EpsilonParams { d, h, r }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (d, h, r, norm0_w, norm1_w, c = 1.0))]
fn rhs_bound_superapprox(d: f64, h: f64, r: usize, norm0_w: f64, norm1_w: f64, c: f64) -> f64 {
    scaling::rhs_bound_superapprox(d, h, r, norm0_w, norm1_w, c)
}

#[pyfunction]
#[pyo3(signature = (eps, p, h, norm0_w, fdual, c = 1.0))]
fn rhs_bound_local_estimate(eps: f64, p: usize, h: f64, norm0_w: f64, fdual: f64, c: f64) -> f64 {
    scaling::rhs_bound_local_estimate(eps, p, h, norm0_w, fdual, c)
}

/// Parsed experiment configuration.
#[pyclass(frozen)]
struct Config {
    inner: ExperimentConfig,
}

#[pymethods]
impl Config {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        Ok(Config { inner: harness::parse_config(text).map_err(err)? })
    }

    #[getter]
    fn experiment(&self) -> &'static str {
        self.inner.experiment.name()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Runs the sweep and writes the CSV files; returns
    /// `(passed, records, violation lines)`.
    #[pyo3(signature = (out, jobs = 1))]
    fn run(&self, py: Python<'_>, out: PathBuf, jobs: usize) -> PyResult<(bool, usize, Vec<String>)> {
        let outcome = py.detach(|| harness::run(&self.inner, &out, jobs)).map_err(err)?;
        Ok((outcome.passed(), outcome.records.len(), outcome.violations.iter().map(|v| v.to_string()).collect()))
    }
}

/// Column deltas `(column, max_abs, max_rel)` and flagged cells
/// `(row, column, a, b)` of two CSV files.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn compare(a: PathBuf, b: PathBuf) -> PyResult<(Vec<(String, f64, f64)>, Vec<(usize, String, String, String)>)> {
    let report = harness::compare_runs(&a, &b).map_err(err)?;
    Ok((
        report.columns.into_iter().map(|c| (c.column, c.max_abs, c.max_rel)).collect(),
        report.flags.into_iter().map(|f| (f.row, f.column, f.a, f.b)).collect(),
    ))
}

#[pyfunction]
fn experiments() -> Vec<&'static str> {
    Experiment::ALL.iter().map(|e| e.name()).collect()
}

#[pyfunction]
fn describe(name: &str) -> PyResult<String> {
    Experiment::parse(name)
        .map(harness::describe)
        .ok_or_else(|| PyValueError::new_err(format!("unknown experiment \"{name}\"")))
}

#[pymodule]
fn scale_probe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mesh>()?;
    m.add_class::<Space>()?;
    m.add_class::<Cutoff>()?;
    m.add_class::<Config>()?;
    m.add_function(wrap_pyfunction!(epsilon, m)?)?;
    m.add_function(wrap_pyfunction!(rhs_bound_superapprox, m)?)?;
    m.add_function(wrap_pyfunction!(rhs_bound_local_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    m.add_function(wrap_pyfunction!(describe, m)?)?;
    Ok(())
}
