use std::path::PathBuf;

use elliptic_amp::density_evolution::de_scalar_lv as scalar_de;
use elliptic_amp::experiments::{run_figure as figure, ExperimentConfig, FigureName};
use elliptic_amp::fixed_point::{solve_system as solve, GrowthLaw};
use elliptic_amp::lcp::{equilibrium as solve_equilibrium, Solver};
use elliptic_amp::linalg;
use elliptic_amp::lv_stats::{f_surv_density, wasserstein2_1d, EmpiricalMeasure, LimitLaw};
use elliptic_amp::rand_matrix::{sample_elliptic as elliptic, sample_normalized_elliptic};
use elliptic_amp::Matrix;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

fn value_error(e: elliptic_amp::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn serialize<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &v)
}

fn growth_law(r: Option<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<GrowthLaw> {
    let r = r.unwrap_or_else(|| vec![1.0]);
    let weights = weights.unwrap_or_else(|| vec![1.0 / r.len().max(1) as f64; r.len()]);
    if weights.len() != r.len() {
        return Err(PyValueError::new_err("r and weights must have the same length"));
    }
    GrowthLaw::new(r.into_iter().zip(weights).collect()).map_err(value_error)
}

fn parse_solver(name: &str) -> PyResult<Solver> {
    match name {
        "auto" => Ok(Solver::Auto),
        "lemke" => Ok(Solver::Lemke),
        "contraction" => Ok(Solver::Contraction),
        other => Err(PyValueError::new_err(format!("unknown solver {other:?}"))),
    }
}

fn parse_config(config: Option<&str>) -> PyResult<ExperimentConfig> {
    match config {
        Some(text) => ExperimentConfig::from_json(text).map_err(value_error),
        None => Ok(ExperimentConfig::default()),
    }
}

/// Elliptic matrix as a list of rows. With `normalized=True` entries are
/// divided by sqrt(n).
#[pyfunction]
#[pyo3(signature = (n, rho, seed, normalized = false))]
fn sample_elliptic(n: usize, rho: f64, seed: u64, normalized: bool) -> PyResult<Vec<Vec<f64>>> {
    let m = if normalized { sample_normalized_elliptic(n, rho, seed) } else { elliptic(n, rho, seed) };
    Ok(m.map_err(value_error)?.to_rows())
}

/// Largest singular value of a square matrix given as rows.
#[pyfunction]
fn spectral_norm(rows: Vec<Vec<f64>>) -> PyResult<f64> {
    let m = Matrix::from_rows(&rows).map_err(value_error)?;
    linalg::spectral_norm(&m).map_err(value_error)
}

/// Solution `(delta, sigma, gamma)` of the fixed-point system as a dict.
#[pyfunction]
#[pyo3(signature = (kappa, rho, r = None, weights = None))]
fn solve_system<'py>(
    py: Python<'py>,
    kappa: f64,
    rho: f64,
    r: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let law = growth_law(r, weights)?;
    let sol = solve(kappa, rho, &law).map_err(value_error)?;
    serialize(py, &sol)
}

/// Equilibrium of the Lotka-Volterra system with interactions `A/kappa`,
/// where `A` is given as rows. Growth rates default to 1.
#[pyfunction]
#[pyo3(signature = (a, kappa, r = None, solver = "auto"))]
fn equilibrium<'py>(
    py: Python<'py>,
    a: Vec<Vec<f64>>,
    kappa: f64,
    r: Option<Vec<f64>>,
    solver: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let m = Matrix::from_rows(&a).map_err(value_error)?;
    let r = r.unwrap_or_else(|| vec![1.0; m.rows()]);
    let res = solve_equilibrium(&m, kappa, &r, parse_solver(solver)?).map_err(value_error)?;
    serialize(py, &res)
}

/// AMP iterates against their state-evolution predictions. `config` is the
/// same JSON accepted by the command-line tool.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn run_amp_lv<'py>(py: Python<'py>, config: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = parse_config(config)?;
    let report = py.detach(|| elliptic_amp::experiments::run_amp_lv(&cfg)).map_err(value_error)?;
    serialize(py, &report)
}

/// `theta_1, ..., theta_depth` of the scalar recursion.
#[pyfunction]
#[pyo3(signature = (delta, depth, r = None, weights = None))]
fn de_scalar_lv(delta: f64, depth: usize, r: Option<Vec<f64>>, weights: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let law = growth_law(r, weights)?;
    Ok(scalar_de(delta, &law, depth).map_err(value_error)?.theta)
}

/// 2-Wasserstein distance between two empirical measures on the line.
#[pyfunction]
fn wasserstein2(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    let a = EmpiricalMeasure::new(a).map_err(value_error)?;
    let b = EmpiricalMeasure::new(b).map_err(value_error)?;
    wasserstein2_1d(&a, &b).map_err(value_error)
}

/// Density of the surviving abundances at each point of `ys`.
#[pyfunction]
#[pyo3(signature = (kappa, rho, ys, r = None, weights = None))]
fn f_surv(
    kappa: f64,
    rho: f64,
    ys: Vec<f64>,
    r: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
) -> PyResult<Vec<f64>> {
    let law = growth_law(r, weights)?;
    let sol = solve(kappa, rho, &law).map_err(value_error)?;
    let limit = LimitLaw::new(&sol, &law);
    Ok(ys.iter().map(|&y| f_surv_density(&limit, y)).collect())
}

/// Writes the CSV files of a figure and returns their paths.
#[pyfunction]
#[pyo3(signature = (name, output_dir, config = None))]
fn run_figure(py: Python<'_>, name: &str, output_dir: PathBuf, config: Option<&str>) -> PyResult<Vec<PathBuf>> {
    let name: FigureName = name.parse().map_err(value_error)?;
    let cfg = parse_config(config)?;
    let out = py.detach(|| figure(name, &cfg, &output_dir)).map_err(value_error)?;
    Ok(out.files)
}

#[pymodule]
#[pyo3(name = "elliptic_amp")]
fn elliptic_amp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sample_elliptic, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_norm, m)?)?;
    m.add_function(wrap_pyfunction!(solve_system, m)?)?;
    m.add_function(wrap_pyfunction!(equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(run_amp_lv, m)?)?;
    m.add_function(wrap_pyfunction!(de_scalar_lv, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein2, m)?)?;
    m.add_function(wrap_pyfunction!(f_surv, m)?)?;
    m.add_function(wrap_pyfunction!(run_figure, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
