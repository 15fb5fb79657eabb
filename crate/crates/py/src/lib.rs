//! Python bindings. Structured arguments and results (transforms,
//! generators, boundary conditions, reports) cross the boundary as plain
//! dicts and strings in the same shapes the scenario files use.

use nongibbs::badness::{self, BadnessOptions, ConfigGenerator};
use nongibbs::exact::{self, ExactDistribution, DEFAULT_ENUMERATION_CAP};
use nongibbs::kac::{self, KacProfile, KacShape};
use nongibbs::transform::TransformSpec;
use nongibbs::{meanfield, Alphabet, BoundaryCondition, Configuration, Interaction, Site};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: nongibbs::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<PyObject> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn bc_of(obj: Option<&Bound<'_, PyAny>>, default: BoundaryCondition) -> PyResult<BoundaryCondition> {
    obj.map_or(Ok(default), from_py)
}

fn spins(values: Vec<(Vec<i64>, i8)>) -> PyResult<Configuration> {
    Configuration::from_pairs(Alphabet::Spin, values.into_iter().map(|(c, v)| (Site::new(c), v))).map_err(err)
}

/// Finite box `[lower, upper]` (inclusive) of Z^d.
#[pyclass(module = "pynongibbs", frozen)]
#[derive(Clone)]
struct Lattice(nongibbs::Lattice);

#[pymethods]
impl Lattice {
    #[new]
    fn new(lower: Vec<i64>, upper: Vec<i64>) -> PyResult<Self> {
        nongibbs::Lattice::new(lower, upper).map(Lattice).map_err(err)
    }

    #[staticmethod]
    fn cube(dim: usize, side: usize) -> PyResult<Self> {
        nongibbs::Lattice::cube(dim, side).map(Lattice).map_err(err)
    }

    #[staticmethod]
    fn centered(dim: usize, radius: usize) -> PyResult<Self> {
        nongibbs::Lattice::centered(dim, radius).map(Lattice).map_err(err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sites(&self) -> Vec<Vec<i64>> {
        self.0.sites().iter().map(|s| s.coords().to_vec()).collect()
    }

    fn __len__(&self) -> usize {
        self.0.sites().len()
    }

    fn __repr__(&self) -> String {
        format!("Lattice({:?}, {:?})", self.0.lower(), self.0.upper())
    }
}

#[pyclass(module = "pynongibbs", frozen)]
#[derive(Clone)]
struct SpinModel(nongibbs::SpinModel);

#[pymethods]
impl SpinModel {
    /// `pairs` is a list of `(offset, coupling)`.
    #[new]
    #[pyo3(signature = (lattice, pairs, beta, h = 0.0))]
    fn new(lattice: &Lattice, pairs: Vec<(Vec<i64>, f64)>, beta: f64, h: f64) -> PyResult<Self> {
        let i = Interaction::new(lattice.0.dim(), pairs).map_err(err)?.with_uniform_field(h);
        nongibbs::SpinModel::new(lattice.0.clone(), i, beta).map(SpinModel).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (lattice, j, beta, h = 0.0))]
    fn ising(lattice: &Lattice, j: f64, beta: f64, h: f64) -> PyResult<Self> {
        nongibbs::SpinModel::ising(lattice.0.clone(), j, h, beta).map(SpinModel).map_err(err)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn lattice(&self) -> Lattice {
        Lattice(self.0.lattice().clone())
    }

    fn with_beta(&self, beta: f64) -> PyResult<Self> {
        self.0.clone().with_beta(beta).map(SpinModel).map_err(err)
    }

    #[pyo3(signature = (sigma, bc = None))]
    fn energy(&self, sigma: Vec<(Vec<i64>, i8)>, bc: Option<&Bound<'_, PyAny>>) -> PyResult<f64> {
        let bc = bc_of(bc, BoundaryCondition::Free)?;
        self.0.energy(&spins(sigma)?, &bc).map_err(err)
    }

    fn content_hash(&self) -> String {
        self.0.content_hash()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<PyObject> {
        to_py(py, &self.0)
    }
}

/// Exact Gibbs distribution on a finite window by enumeration.
#[pyclass(module = "pynongibbs", frozen)]
struct Exact(ExactDistribution);

#[pymethods]
impl Exact {
    #[new]
    #[pyo3(signature = (model, bc = None, cap = DEFAULT_ENUMERATION_CAP))]
    fn new(model: &SpinModel, bc: Option<&Bound<'_, PyAny>>, cap: usize) -> PyResult<Self> {
        let bc = bc_of(bc, BoundaryCondition::Free)?;
        ExactDistribution::new(&model.0, &bc, cap).map(Exact).map_err(err)
    }

    fn log_partition(&self) -> f64 {
        self.0.log_partition()
    }

    /// `sigma` lists `(site, ±1)` for every active site.
    fn probability(&self, sigma: Vec<(Vec<i64>, i8)>) -> PyResult<f64> {
        self.0.probability(&spins(sigma)?).map_err(err)
    }

    fn marginal(&self, partial: Vec<(Vec<i64>, i8)>) -> PyResult<f64> {
        self.0.marginal(&spins(partial)?).map_err(err)
    }

    fn spin_expectation(&self, site: Vec<i64>) -> PyResult<f64> {
        self.0.spin_expectation(&Site::new(site)).map_err(err)
    }

    fn magnetization_distribution(&self) -> PyResult<Vec<(i64, f64)>> {
        self.0.magnetization_distribution().map_err(err)
    }

    fn binder_cumulant(&self) -> PyResult<f64> {
        Ok(self.0.magnetization_moments().map_err(err)?.binder_cumulant())
    }
}

#[pyfunction]
#[pyo3(signature = (model, bc = None))]
fn ground_state_degeneracy(model: &SpinModel, bc: Option<&Bound<'_, PyAny>>) -> PyResult<u128> {
    let bc = bc_of(bc, BoundaryCondition::Free)?;
    exact::ground_state_degeneracy(&model.0, &bc).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (betas, p, h = 0.0))]
fn cw_jump_scan(py: Python<'_>, betas: Vec<f64>, p: f64, h: f64) -> PyResult<PyObject> {
    to_py(py, &meanfield::cw_jump_scan(&betas, p, h).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (gamma, beta, h = 0.0, shape = None))]
fn lp_free_energy_gap(
    py: Python<'_>,
    gamma: f64,
    beta: f64,
    h: f64,
    shape: Option<&Bound<'_, PyAny>>,
) -> PyResult<PyObject> {
    let shape: KacShape = shape.map_or(Ok(KacShape::TopHat), from_py)?;
    let profile = KacProfile::new(shape, gamma, 1).map_err(err)?;
    to_py(py, &kac::lp_free_energy_gap(&profile, beta, h).map_err(err)?)
}

/// `transform` and `generator` are dicts such as `{"kind": "decimation",
/// "sublattice": "even"}` and `{"kind": "checkerboard"}`.
#[pyfunction]
#[pyo3(signature = (model, transform, radii, generator = None, margin = None, bc = None, cap = DEFAULT_ENUMERATION_CAP))]
#[allow(clippy::too_many_arguments)]
fn badness_profile(
    py: Python<'_>,
    model: &SpinModel,
    transform: &Bound<'_, PyAny>,
    radii: Vec<usize>,
    generator: Option<&Bound<'_, PyAny>>,
    margin: Option<usize>,
    bc: Option<&Bound<'_, PyAny>>,
    cap: usize,
) -> PyResult<PyObject> {
    let transform: TransformSpec = from_py(transform)?;
    let generator: ConfigGenerator = generator.map_or(Ok(ConfigGenerator::Checkerboard), from_py)?;
    let options = BadnessOptions {
        margin,
        bc: bc_of(bc, BoundaryCondition::AllPlus)?,
        cap,
        ..BadnessOptions::default()
    };
    let curve = py
        .allow_threads(|| badness::badness_profile(&model.0, &transform, &generator, &radii, &options))
        .map_err(err)?;
    to_py(py, &curve)
}

#[pymodule]
fn pynongibbs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lattice>()?;
    m.add_class::<SpinModel>()?;
    m.add_class::<Exact>()?;
    m.add_function(wrap_pyfunction!(ground_state_degeneracy, m)?)?;
    m.add_function(wrap_pyfunction!(cw_jump_scan, m)?)?;
    m.add_function(wrap_pyfunction!(lp_free_energy_gap, m)?)?;
    m.add_function(wrap_pyfunction!(badness_profile, m)?)?;
    m.add("DEFAULT_ENUMERATION_CAP", DEFAULT_ENUMERATION_CAP)?;
    Ok(())
}
