//! Python bindings for the hadwish laboratory: sampling Wishart-type
//! matrices, entrywise absolute powers, eigenvalue extremes and PSD
//! certificates, plus the scalar analytics behind the positivity
//! transition.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use hadwish::eigensolve::{self, PsdVerdict, Tolerance};
use hadwish::ensembles::{self, EntryLaw, SeedSpec};
use hadwish::error::Error;
use hadwish::experiments;
use hadwish::matrixops;
use hadwish::spectral;

fn py_err(err: Error) -> PyErr {
    match err {
        Error::SolverFailure(_) | Error::Io(_) | Error::Serialize(_) => {
            PyRuntimeError::new_err(err.to_string())
        }
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_law(law: &str) -> PyResult<EntryLaw> {
    law.parse().map_err(py_err)
}

/// Dense real symmetric matrix (packed lower triangle).
#[pyclass(frozen, name = "SymmetricMatrix", module = "hadwish_py")]
struct PySymmetricMatrix {
    inner: matrixops::SymmetricMatrix,
}

#[pymethods]
impl PySymmetricMatrix {
    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn get(&self, i: usize, j: usize) -> PyResult<f64> {
        if i >= self.inner.dim() || j >= self.inner.dim() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(i, j))
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn frobenius_norm(&self) -> f64 {
        self.inner.frobenius_norm()
    }

    /// Entrywise |a|^alpha with 0^alpha = 0.
    fn hadamard_abs_power(&self, py: Python<'_>, alpha: f64) -> PyResult<Self> {
        py.detach(|| matrixops::hadamard_abs_power(&self.inner, alpha))
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    /// All eigenvalues, ascending.
    fn eigenvalues(&self, py: Python<'_>) -> PyResult<Vec<f64>> {
        py.detach(|| eigensolve::eigen_spectrum(&self.inner))
            .map(|s| s.eigenvalues().to_vec())
            .map_err(py_err)
    }

    fn lambda_min(&self, py: Python<'_>) -> PyResult<f64> {
        py.detach(|| eigensolve::lambda_min(&self.inner)).map_err(py_err)
    }

    /// (smallest, largest) eigenvalues from one reduction.
    fn lambda_extremes(&self, py: Python<'_>) -> PyResult<(f64, f64)> {
        py.detach(|| eigensolve::lambda_extremes(&self.inner)).map_err(py_err)
    }

    /// Gershgorin intervals as (center, radius) pairs.
    fn gershgorin_intervals(&self) -> Vec<(f64, f64)> {
        eigensolve::gershgorin_intervals(&self.inner)
    }

    /// PSD certificate as (verdict, value): ("psd_gershgorin" | "psd_spectral", margin)
    /// or ("not_psd", lambda_min). `tol` defaults to 1e-10 |A|_F.
    #[pyo3(signature = (tol=None))]
    fn psd_certificate(&self, py: Python<'_>, tol: Option<f64>) -> PyResult<(String, f64)> {
        let tol = match tol {
            Some(t) => Tolerance::Value(t),
            None => Tolerance::Auto,
        };
        let verdict = py
            .detach(|| eigensolve::psd_certificate(&self.inner, tol))
            .map_err(py_err)?;
        Ok(match verdict {
            PsdVerdict::CertifiedPsd {
                method: eigensolve::CertificateMethod::Gershgorin,
                margin,
            } => ("psd_gershgorin".into(), margin),
            PsdVerdict::CertifiedPsd { method: eigensolve::CertificateMethod::Spectral, margin } => {
                ("psd_spectral".into(), margin)
            }
            PsdVerdict::CertifiedNotPsd { lambda_min } => ("not_psd".into(), lambda_min),
            PsdVerdict::Indeterminate => ("indeterminate".into(), f64::NAN),
        })
    }

    /// Plain-text dump (round-trip precision).
    fn dump(&self) -> String {
        self.inner.dump()
    }

    fn __repr__(&self) -> String {
        format!("SymmetricMatrix(dim={})", self.inner.dim())
    }
}

/// One Monte Carlo trial of the full pipeline.
#[pyclass(frozen, name = "TrialRecord", module = "hadwish_py")]
struct PyTrialRecord {
    #[pyo3(get)]
    n: u64,
    #[pyo3(get)]
    m: u64,
    #[pyo3(get)]
    s: f64,
    #[pyo3(get)]
    alpha: f64,
    #[pyo3(get)]
    trial_index: u64,
    #[pyo3(get)]
    lambda_min: f64,
    #[pyo3(get)]
    lambda_max: f64,
    #[pyo3(get)]
    is_psd: bool,
}

#[pymethods]
impl PyTrialRecord {
    fn __repr__(&self) -> String {
        format!(
            "TrialRecord(n={}, m={}, s={}, alpha={}, trial={}, lambda_min={}, lambda_max={}, is_psd={})",
            self.n, self.m, self.s, self.alpha, self.trial_index, self.lambda_min,
            self.lambda_max, self.is_psd
        )
    }
}

/// floor(n^s), guarded against rounding just below exact integer powers.
#[pyfunction]
fn rows_for(n: u64, s: f64) -> PyResult<u64> {
    ensembles::rows_for(n, s).map_err(py_err)
}

/// E|Z|^alpha for a standard normal Z.
#[pyfunction]
fn ell_alpha(alpha: f64) -> PyResult<f64> {
    spectral::ell_alpha(alpha).map_err(py_err)
}

/// E[(|X|^alpha - ell)(|Y|^alpha - ell)] for correlated standard normals.
#[pyfunction]
fn bivariate_i(rho: f64, alpha: f64) -> PyResult<f64> {
    spectral::bivariate_i(rho, alpha).map_err(py_err)
}

/// (m1, m2, m4) limit targets for the centered subcritical spectrum.
#[pyfunction]
fn moment_targets(alpha: f64) -> PyResult<(f64, f64, f64)> {
    spectral::moment_targets(alpha).map_err(py_err)
}

/// Exact Kolmogorov-Smirnov distance between two samples.
#[pyfunction]
fn ks_distance(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let (la, lb) = (a.len(), b.len());
    let sa = spectral::EsdSample::from_values(a, la, 1).map_err(py_err)?;
    let sb = spectral::EsdSample::from_values(b, lb, 1).map_err(py_err)?;
    Ok(spectral::ks_distance(&sa, &sb))
}

/// Conditional expectation of the centered power product over a fresh
/// Gaussian middle row bridging the two given rows.
#[pyfunction]
fn conditional_y(r_i: Vec<f64>, r_j: Vec<f64>, alpha: f64) -> PyResult<f64> {
    let pair = spectral::RowPair::from_rows(&r_i, &r_j).map_err(py_err)?;
    spectral::conditional_y(&pair, alpha).map_err(py_err)
}

/// Samples X (m = floor(n^s) rows, n columns) and returns A = X X^T / n.
#[pyfunction]
#[pyo3(signature = (n, s, law="gaussian", seed=0, trial=0))]
fn sample_wishart(
    py: Python<'_>,
    n: u64,
    s: f64,
    law: &str,
    seed: u64,
    trial: u64,
) -> PyResult<PySymmetricMatrix> {
    let law = parse_law(law)?;
    let inner = py.detach(|| -> Result<_, Error> {
        let m = ensembles::rows_for(n, s)?;
        let x = ensembles::sample_matrix(m as usize, n as usize, &law, &SeedSpec::new(seed, trial))?;
        matrixops::wishart(&x, n as usize)
    });
    Ok(PySymmetricMatrix { inner: inner.map_err(py_err)? })
}

/// The deterministic counterexample matrix with entries 1 + eps*i*j.
#[pyfunction]
fn horn_fitzgerald(n: usize, eps: f64) -> PyResult<PySymmetricMatrix> {
    matrixops::horn_fitzgerald_matrix(n, eps)
        .map(|inner| PySymmetricMatrix { inner })
        .map_err(py_err)
}

/// Full pipeline trial: sample, power, classify PSD.
#[pyfunction]
#[pyo3(signature = (n, s, alpha, law="gaussian", seed=0, trial=0))]
fn run_trial(
    py: Python<'_>,
    n: u64,
    s: f64,
    alpha: f64,
    law: &str,
    seed: u64,
    trial: u64,
) -> PyResult<PyTrialRecord> {
    let law = parse_law(law)?;
    let rec = py
        .detach(|| experiments::run_trial(n, s, alpha, &law, &SeedSpec::new(seed, trial)))
        .map_err(py_err)?;
    Ok(PyTrialRecord {
        n: rec.n,
        m: rec.m,
        s: rec.s,
        alpha: rec.alpha,
        trial_index: rec.trial_index,
        lambda_min: rec.lambda_min,
        lambda_max: rec.lambda_max,
        is_psd: rec.is_psd,
    })
}

#[pymodule]
fn hadwish_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySymmetricMatrix>()?;
    m.add_class::<PyTrialRecord>()?;
    m.add_function(wrap_pyfunction!(rows_for, m)?)?;
    m.add_function(wrap_pyfunction!(ell_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(bivariate_i, m)?)?;
    m.add_function(wrap_pyfunction!(moment_targets, m)?)?;
    m.add_function(wrap_pyfunction!(ks_distance, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_y, m)?)?;
    m.add_function(wrap_pyfunction!(sample_wishart, m)?)?;
    m.add_function(wrap_pyfunction!(horn_fitzgerald, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    Ok(())
}
