//! Python bindings: spaces, operators and tensors as classes, estimators as functions returning
//! plain dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pqreg::extension::{extend_operator_lq, hahn_banach_extend, DyadicLevel, Subspace, ZElement};
use pqreg::factor::{maurey_rosenthal_factorize, strong_factorize_lr, verify_factorization, DEFAULT_MAX_CUTS};
use pqreg::tensor::{tensor_norm_bounds, TensorNorm};
use pqreg::{Exponent, LatticeVector, RegularityParams};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn exponent(p: f64) -> PyResult<Exponent> {
    Exponent::new(p).map_err(err)
}

fn to_py<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

/// A finite measure on atoms with a weighted L_r norm.
#[pyclass(name = "FunctionSpace", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpace(pqreg::FunctionSpace);

#[pymethods]
impl PySpace {
    #[new]
    #[pyo3(signature = (weights, r))]
    fn new(weights: Vec<f64>, r: f64) -> PyResult<Self> {
        Ok(PySpace(pqreg::FunctionSpace::weighted_lr(weights, exponent(r)?).map_err(err)?))
    }

    #[staticmethod]
    fn lr(n: usize, r: f64) -> PyResult<Self> {
        Ok(PySpace(pqreg::FunctionSpace::lr(n, exponent(r)?).map_err(err)?))
    }

    #[getter]
    fn atoms(&self) -> usize {
        self.0.atoms()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn norm(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.norm(&x).map_err(err)
    }

    fn dual_norm(&self, x: Vec<f64>) -> PyResult<f64> {
        self.0.dual_norm(&x).map_err(err)
    }

    fn dual(&self) -> PyResult<Self> {
        Ok(PySpace(self.0.dual().map_err(err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("FunctionSpace(atoms={}, norm={:?})", self.0.atoms(), self.0.kind())
    }
}

/// A matrix operator between two spaces; `entries[i][j]` maps atom j to atom i.
#[pyclass(name = "Operator", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyOperator(pqreg::OperatorMatrix);

#[pymethods]
impl PyOperator {
    #[new]
    fn new(domain: &PySpace, codomain: &PySpace, entries: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(PyOperator(pqreg::OperatorMatrix::new(domain.0.clone(), codomain.0.clone(), entries).map_err(err)?))
    }

    #[staticmethod]
    fn identity(space: &PySpace) -> Self {
        PyOperator(pqreg::OperatorMatrix::identity(space.0.clone()))
    }

    #[staticmethod]
    fn from_json(s: &str) -> PyResult<Self> {
        Ok(PyOperator(serde_json::from_str(s).map_err(err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(err)
    }

    #[getter]
    fn entries(&self) -> Vec<Vec<f64>> {
        self.0.entries().to_vec()
    }

    #[getter]
    fn domain(&self) -> PySpace {
        PySpace(self.0.domain().clone())
    }

    #[getter]
    fn codomain(&self) -> PySpace {
        PySpace(self.0.codomain().clone())
    }

    fn apply(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.0.apply(&x).map_err(err)
    }
}

/// Σ x_i ⊗ y_i over two spaces.
#[pyclass(name = "Tensor", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyTensor(pqreg::Tensor);

#[pymethods]
impl PyTensor {
    #[new]
    fn new(left: &PySpace, right: &PySpace, terms: Vec<(Vec<f64>, Vec<f64>)>) -> PyResult<Self> {
        Ok(PyTensor(pqreg::Tensor::new(left.0.clone(), right.0.clone(), terms).map_err(err)?))
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.0).map_err(err)
    }
}

#[pyfunction]
fn operator_norm(py: Python<'_>, t: &PyOperator) -> PyResult<Py<PyAny>> {
    to_py(py, &pqreg::operator_norm(&t.0).map_err(err)?)
}

/// Certified interval for ρ_{p,q}(T).
#[pyfunction]
#[pyo3(signature = (t, p, q, tuple_size = 2, seed = 0, restarts = 32))]
fn rho_lower_bound(py: Python<'_>, t: &PyOperator, p: f64, q: f64, tuple_size: usize, seed: u64, restarts: usize) -> PyResult<Py<PyAny>> {
    let params = RegularityParams::new(exponent(p)?, exponent(q)?).map_err(err)?;
    to_py(py, &pqreg::rho_lower_bound(&t.0, params, tuple_size, seed, restarts).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (t, p, q, tuple_size = 2, resolution = 1e-3))]
fn rho_oracle(py: Python<'_>, t: &PyOperator, p: f64, q: f64, tuple_size: usize, resolution: f64) -> PyResult<Py<PyAny>> {
    let params = RegularityParams::new(exponent(p)?, exponent(q)?).map_err(err)?;
    to_py(py, &pqreg::rho_oracle(&t.0, params, tuple_size, resolution).map_err(err)?)
}

/// Norm names: eps, pi, g_p, d_p, w_p, phi_pq, r_pq, h_pq, k_pq.
#[pyfunction]
#[pyo3(signature = (z, norm, p = None, q = None, seed = 0))]
fn tensor_norm(py: Python<'_>, z: &PyTensor, norm: &str, p: Option<f64>, q: Option<f64>, seed: u64) -> PyResult<Py<PyAny>> {
    let mut spec = serde_json::json!({ "name": norm });
    if let Some(p) = p {
        spec["p"] = serde_json::to_value(exponent(p)?).map_err(err)?;
    }
    if let Some(q) = q {
        spec["q"] = serde_json::to_value(exponent(q)?).map_err(err)?;
    }
    let which: TensorNorm = serde_json::from_value(spec).map_err(err)?;
    to_py(py, &tensor_norm_bounds(&z.0, which, seed).map_err(err)?)
}

/// Maurey–Rosenthal factorization T = M_g ∘ inner ∘ M_f; with `strong=(q, r)` the L_r version.
#[pyfunction]
#[pyo3(signature = (t, p, s, constant = None, strong = None, max_cuts = DEFAULT_MAX_CUTS, seed = 0))]
fn factorize(
    py: Python<'_>,
    t: &PyOperator,
    p: f64,
    s: f64,
    constant: Option<f64>,
    strong: Option<(f64, f64)>,
    max_cuts: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let (res, params) = match strong {
        Some((q, r)) => {
            let res = strong_factorize_lr(&t.0, exponent(p)?, exponent(q)?, exponent(r)?, constant, max_cuts, seed);
            (res, Some(RegularityParams::new(exponent(p)?, exponent(q)?).map_err(err)?))
        }
        None => (maurey_rosenthal_factorize(&t.0, exponent(p)?, exponent(s)?, constant, max_cuts, seed), None),
    };
    let res = res.map_err(err)?;
    let v = verify_factorization(&res, &t.0, params).map_err(err)?;
    to_py(py, &serde_json::json!({ "factorization": res, "verify": v }))
}

fn z_element(space: &PySpace, components: Vec<Vec<f64>>) -> PyResult<ZElement> {
    ZElement::new(space.0.clone(), components.into_iter().map(LatticeVector).collect()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (space, components, q, seed = 0))]
fn z_norm(py: Python<'_>, space: &PySpace, components: Vec<Vec<f64>>, q: f64, seed: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &pqreg::z_norm(&z_element(space, components)?, exponent(q)?, seed).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (space, components, q, seed = 0))]
fn calderon_product_norm(py: Python<'_>, space: &PySpace, components: Vec<Vec<f64>>, q: f64, seed: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &pqreg::calderon_product_norm(&z_element(space, components)?, exponent(q)?, seed).map_err(err)?)
}

/// Extends the map basis[i] ↦ images[i] ∈ ℓ_q^n from span(basis) with minimal ρ_{∞,q}.
#[pyfunction]
#[pyo3(signature = (ambient, basis, images, q, level = None, seed = 0))]
fn extend(
    py: Python<'_>,
    ambient: &PySpace,
    basis: Vec<Vec<f64>>,
    images: Vec<Vec<f64>>,
    q: f64,
    level: Option<u32>,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let x0 = Subspace::new(ambient.0.clone(), basis.into_iter().map(LatticeVector).collect()).map_err(err)?;
    let q = exponent(q)?;
    let ext = match level {
        Some(l) => extend_operator_lq(&x0, &images, DyadicLevel::new(l, q).map_err(err)?, seed),
        None => hahn_banach_extend(&x0, &images, q, seed),
    }
    .map_err(err)?;
    to_py(py, &ext)
}

/// Cells are (p, q, r1, r2) tuples.
#[pyfunction]
#[pyo3(signature = (cells, ns = vec![2, 3, 4], samples = 20, seed = 0))]
fn mz_sweep(py: Python<'_>, cells: Vec<(f64, f64, f64, f64)>, ns: Vec<usize>, samples: usize, seed: u64) -> PyResult<Py<PyAny>> {
    let grid = cells
        .into_iter()
        .map(|(p, q, a, b)| Ok((exponent(p)?, exponent(q)?, exponent(a)?, exponent(b)?)))
        .collect::<PyResult<Vec<_>>>()?;
    to_py(py, &pqreg::mz_coincidence_sweep(&grid, &ns, samples, seed).map_err(err)?)
}

/// Runs the acceptance battery over a corpus directory.
#[pyfunction]
#[pyo3(signature = (corpus, seed = 0))]
fn verify_suite(py: Python<'_>, corpus: &str, seed: u64) -> PyResult<Py<PyAny>> {
    let report = py.detach(|| pqreg::verify_suite(std::path::Path::new(corpus), seed, &mut |_| {})).map_err(err)?;
    to_py(py, &report)
}

#[pymodule]
fn pqreg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("K_G", pqreg::K_G)?;
    m.add_class::<PySpace>()?;
    m.add_class::<PyOperator>()?;
    m.add_class::<PyTensor>()?;
    m.add_function(wrap_pyfunction!(operator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(rho_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(rho_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(tensor_norm, m)?)?;
    m.add_function(wrap_pyfunction!(factorize, m)?)?;
    m.add_function(wrap_pyfunction!(z_norm, m)?)?;
    m.add_function(wrap_pyfunction!(calderon_product_norm, m)?)?;
    m.add_function(wrap_pyfunction!(extend, m)?)?;
    m.add_function(wrap_pyfunction!(mz_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    Ok(())
}
