//! Python bindings for the dfmc degrees-of-freedom lab.
//!
//! Exposes the core types (design matrices, fitters, data models) and the
//! main operations: fitting, Monte Carlo DF estimation, and the exact
//! oracles. Vectors cross the boundary as plain Python lists of floats.

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use dfmc::error::Error;
use dfmc::experiments::{gaussian_instance, standardized_mean};
use dfmc::fitters::Fitter;
use dfmc::linalg::DesignMatrix as CoreDesign;
use dfmc::mc::{self, DataModel as CoreModel, EstimatorKind};
use dfmc::oracles;

fn to_py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParam(_) | Error::DimensionMismatch { .. } => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn vector(values: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(values)
}

/// A dense n x p design matrix with cached numerical rank.
#[pyclass(name = "DesignMatrix", module = "dfmc_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyDesignMatrix {
    inner: CoreDesign,
}

#[pymethods]
impl PyDesignMatrix {
    /// Build from a list of rows.
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let n = rows.len();
        let p = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != p) {
            return Err(PyValueError::new_err("rows have inconsistent lengths"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(Self {
            inner: CoreDesign::from_rows(n, p, &flat).map_err(to_py_err)?,
        })
    }

    /// n x n identity design.
    #[staticmethod]
    fn identity(n: usize) -> PyResult<Self> {
        if n == 0 {
            return Err(PyValueError::new_err("n must be >= 1"));
        }
        Ok(Self {
            inner: CoreDesign::identity(n),
        })
    }

    /// Seeded n x p matrix of i.i.d. standard Gaussian entries.
    #[staticmethod]
    fn gaussian(n: usize, p: usize, seed: u64) -> PyResult<Self> {
        let (design, _) = gaussian_instance(n, p, seed).map_err(to_py_err)?;
        Ok(Self { inner: design })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn p(&self) -> usize {
        self.inner.p()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    /// The X*1 mean vector standardized to mean zero, sd 7.
    fn standardized_mean(&self) -> PyResult<Vec<f64>> {
        Ok(standardized_mean(&self.inner)
            .map_err(to_py_err)?
            .as_slice()
            .to_vec())
    }

    fn __repr__(&self) -> String {
        format!("DesignMatrix({}x{}, rank={})", self.inner.n(), self.inner.p(), self.inner.rank())
    }
}

/// A deterministic fitting procedure y -> y_hat.
#[pyclass(name = "Fitter", module = "dfmc_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyFitter {
    inner: Fitter,
}

#[pymethods]
impl PyFitter {
    #[staticmethod]
    fn ols(design: PyDesignMatrix) -> PyResult<Self> {
        Ok(Self {
            inner: Fitter::ols(design.inner).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn ridge(design: PyDesignMatrix, lam: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Fitter::ridge(design.inner, lam).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn best_subset(design: PyDesignMatrix, k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Fitter::best_subset(design.inner, k).map_err(to_py_err)?,
        })
    }

    #[staticmethod]
    fn forward_stepwise(design: PyDesignMatrix, k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Fitter::forward_stepwise(design.inner, k).map_err(to_py_err)?,
        })
    }

    /// Keep the k largest-magnitude coordinates of an n-vector.
    #[staticmethod]
    fn axis_subset(n: usize, k: usize) -> PyResult<Self> {
        Ok(Self {
            inner: Fitter::axis_subset(n, k).map_err(to_py_err)?,
        })
    }

    /// Projection onto a finite set of points.
    #[staticmethod]
    fn point_set(points: Vec<Vec<f64>>) -> PyResult<Self> {
        let points: Vec<DVector<f64>> = points.into_iter().map(vector).collect();
        Ok(Self {
            inner: Fitter::point_set(points).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn response_dim(&self) -> usize {
        self.inner.response_dim()
    }

    /// Fit a response vector; returns (fitted, support, rss).
    fn fit(&self, y: Vec<f64>) -> PyResult<(Vec<f64>, Vec<usize>, f64)> {
        let res = self.inner.fit(&vector(y)).map_err(to_py_err)?;
        Ok((res.fitted.as_slice().to_vec(), res.support, res.rss))
    }

    fn __repr__(&self) -> String {
        format!("Fitter({})", self.inner.describe())
    }
}

/// The data-generating triple (mu, sigma, standard Gaussian noise).
#[pyclass(name = "DataModel", module = "dfmc_py", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyDataModel {
    inner: CoreModel,
}

#[pymethods]
impl PyDataModel {
    #[new]
    #[pyo3(signature = (mu, sigma = 1.0))]
    fn new(mu: Vec<f64>, sigma: f64) -> PyResult<Self> {
        Ok(Self {
            inner: CoreModel::standard_gaussian(vector(mu), sigma).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn mu(&self) -> Vec<f64> {
        self.inner.mu().as_slice().to_vec()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }

    fn __repr__(&self) -> String {
        format!("DataModel(dim={}, sigma={})", self.inner.dim(), self.inner.sigma())
    }
}

/// A Monte Carlo DF estimate.
#[pyclass(name = "DfEstimate", module = "dfmc_py", frozen)]
pub struct PyDfEstimate {
    #[pyo3(get)]
    value: f64,
    #[pyo3(get)]
    std_error: f64,
    #[pyo3(get)]
    replicates: u64,
    #[pyo3(get)]
    estimator: String,
}

impl PyDfEstimate {
    fn from_core(est: mc::DfEstimate) -> Self {
        Self {
            value: est.value,
            std_error: est.std_error,
            replicates: est.replicates,
            estimator: est.estimator.label().to_string(),
        }
    }
}

#[pymethods]
impl PyDfEstimate {
    fn __repr__(&self) -> String {
        format!(
            "DfEstimate(value={:.6}, std_error={:.6}, replicates={}, estimator={:?})",
            self.value, self.std_error, self.replicates, self.estimator
        )
    }
}

fn parse_estimator(name: &str) -> PyResult<EstimatorKind> {
    match name {
        "cov" => Ok(EstimatorKind::Covariance),
        "opt" => Ok(EstimatorKind::Optimism),
        other => Err(PyValueError::new_err(format!(
            "estimator must be 'cov' or 'opt', got {other:?}"
        ))),
    }
}

/// Monte Carlo DF estimate; bit-identical for a given seed at any worker
/// count.
#[pyfunction]
#[pyo3(signature = (model, fitter, replicates, seed, estimator = "cov"))]
fn estimate_df(
    py: Python<'_>,
    model: &PyDataModel,
    fitter: &PyFitter,
    replicates: u64,
    seed: u64,
    estimator: &str,
) -> PyResult<PyDfEstimate> {
    let kind = parse_estimator(estimator)?;
    let est = py
        .detach(|| mc::estimate_df(&model.inner, &fitter.inner, replicates, seed, kind))
        .map_err(to_py_err)?;
    Ok(PyDfEstimate::from_core(est))
}

/// Both estimators on the same draws; returns (covariance, optimism).
#[pyfunction]
fn estimate_df_both(
    py: Python<'_>,
    model: &PyDataModel,
    fitter: &PyFitter,
    replicates: u64,
    seed: u64,
) -> PyResult<(PyDfEstimate, PyDfEstimate)> {
    let (cov, opt) = py
        .detach(|| mc::estimate_df_both(&model.inner, &fitter.inner, replicates, seed))
        .map_err(to_py_err)?;
    Ok((PyDfEstimate::from_core(cov), PyDfEstimate::from_core(opt)))
}

/// Hat-matrix trace of a linear fitter (OLS or ridge).
#[pyfunction]
fn df_trace_linear(fitter: &PyFitter) -> PyResult<f64> {
    oracles::df_trace_linear(&fitter.inner).map_err(to_py_err)
}

/// Tensor-product Gauss-Hermite DF (n <= 3). Returns a dict with the
/// Richardson-extrapolated value, the (coarse, fine) pair, and whether
/// doubling the node count moved the value by less than 1e-6 relative.
#[pyfunction]
fn df_quadrature(
    py: Python<'_>,
    model: &PyDataModel,
    fitter: &PyFitter,
    nodes_per_dim: usize,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let est = oracles::df_quadrature(&model.inner, &fitter.inner, nodes_per_dim)
        .map_err(to_py_err)?;
    let dict = pyo3::types::PyDict::new(py);
    dict.set_item("value", est.value)?;
    dict.set_item("coarse", est.coarse)?;
    dict.set_item("fine", est.fine)?;
    dict.set_item("converged", est.converged(oracles::QUADRATURE_CONVERGENCE_TOL))?;
    Ok(dict.into())
}

/// Exact DF of keep-the-larger-of-two at mean (mu1, mu2), noise sigma.
#[pyfunction]
#[pyo3(signature = (mu1, mu2, sigma = 1.0))]
fn df_axis_pair_reference(mu1: f64, mu2: f64, sigma: f64) -> f64 {
    oracles::df_axis_pair_reference([mu1, mu2], sigma)
}

/// E[max of two standard normals] = 1/sqrt(pi).
#[pyfunction]
fn df_scaling_limit() -> f64 {
    oracles::df_scaling_limit()
}

#[pymodule]
fn dfmc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDesignMatrix>()?;
    m.add_class::<PyFitter>()?;
    m.add_class::<PyDataModel>()?;
    m.add_class::<PyDfEstimate>()?;
    m.add_function(wrap_pyfunction!(estimate_df, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_df_both, m)?)?;
    m.add_function(wrap_pyfunction!(df_trace_linear, m)?)?;
    m.add_function(wrap_pyfunction!(df_quadrature, m)?)?;
    m.add_function(wrap_pyfunction!(df_axis_pair_reference, m)?)?;
    m.add_function(wrap_pyfunction!(df_scaling_limit, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
