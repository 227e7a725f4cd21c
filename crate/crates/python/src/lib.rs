//! Python bindings for `resgreedy-core`.

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use resgreedy_core::greedy::{self, online_error_report};
use resgreedy_core::stability_lab::{self, Mesh, PowerOptions};
use resgreedy_core::{minimax, resolvent1d, Error};
use resgreedy_core::{FamilyKind, GreedyConfig, Grid, Grid1D, MinimaxProblem, ParametricFamily, ScanMode, SourceFn};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NumericalBreakdown(_)
        | Error::NotPositiveDefinite { .. }
        | Error::NoConvergence { .. }
        | Error::DegenerateProbe(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn grid_of(dim: &str, cells: usize) -> PyResult<Grid> {
    match dim {
        "line" => Grid::line(cells),
        "square" => Grid::square(cells),
        other => return Err(PyValueError::new_err(format!("unknown grid dim {other:?}"))),
    }
    .map_err(to_py)
}

fn kind_of(kind: &str) -> PyResult<FamilyKind> {
    match kind {
        "diffusivity" => Ok(FamilyKind::Diffusivity),
        "density" => Ok(FamilyKind::Density),
        other => Err(PyValueError::new_err(format!("unknown family kind {other:?}"))),
    }
}

fn source(values: Vec<f64>) -> PyResult<SourceFn> {
    let grid = Grid1D::new(values.len()).map_err(to_py)?;
    SourceFn::new(grid, values).map_err(to_py)
}

/// Piecewise-constant function on a uniform grid of `[0,1]` or `[0,1]²`.
///
/// On the square, `values` are row-major with the x index fastest.
#[pyclass(name = "PiecewiseFn", frozen, from_py_object)]
#[derive(Clone)]
struct PyPiecewiseFn(resgreedy_core::PiecewiseFn);

#[pymethods]
impl PyPiecewiseFn {
    #[new]
    #[pyo3(signature = (values, dim = "line"))]
    fn new(values: Vec<f64>, dim: &str) -> PyResult<Self> {
        let cells = match dim {
            "square" => (values.len() as f64).sqrt().round() as usize,
            _ => values.len(),
        };
        let grid = grid_of(dim, cells)?;
        resgreedy_core::PiecewiseFn::new(grid, values)
            .map(Self)
            .map_err(to_py)
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.0.values().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.grid().dim()
    }

    fn reciprocal(&self) -> PyResult<Self> {
        self.0.reciprocal().map(Self).map_err(to_py)
    }

    fn linf_norm(&self) -> f64 {
        self.0.linf_norm()
    }

    fn __len__(&self) -> usize {
        self.0.values().len()
    }

    fn __repr__(&self) -> String {
        format!("PiecewiseFn(dim={}, cells={})", self.0.grid().dim(), self.0.values().len())
    }
}

/// Nodal values of `v = R_σ f` on the grid of `f` and `v'` at both ends of every cell.
#[pyfunction]
fn apply_resolvent(sigma: &PyPiecewiseFn, f: Vec<f64>) -> PyResult<(Vec<f64>, Vec<[f64; 2]>)> {
    let sol = resolvent1d::apply_resolvent(&sigma.0, &source(f)?).map_err(to_py)?;
    Ok((sol.nodal().to_vec(), sol.derivative().ends().to_vec()))
}

/// `‖F‖_{L¹}` for the primitive `F` of `f`.
#[pyfunction]
fn wm11_norm(f: Vec<f64>) -> PyResult<f64> {
    Ok(resolvent1d::wm11_norm(&source(f)?))
}

#[pyfunction]
fn tm_operator_norm(m: &PyPiecewiseFn) -> f64 {
    resolvent1d::tm_operator_norm(&m.0)
}

/// Largest probe ratio `‖T_m p‖ / ‖p‖` over the standard probe suite.
#[pyfunction]
#[pyo3(signature = (m, refine = 4))]
fn empirical_star_norm(m: &PyPiecewiseFn, refine: usize) -> PyResult<f64> {
    let probes = resolvent1d::probe_suite(m.0.grid().as_line().map_err(to_py)?, refine).map_err(to_py)?;
    resolvent1d::empirical_star_norm(&m.0, &probes).map_err(to_py)
}

#[pyfunction]
fn resolvent_distance_star(sigma: &PyPiecewiseFn, sigma_tilde: &PyPiecewiseFn) -> PyResult<f64> {
    resolvent1d::resolvent_distance_star(&sigma.0, &sigma_tilde.0).map_err(to_py)
}

/// Returns `(distance, coeffs)`.
#[pyfunction]
fn span_distance_star(tau: &PyPiecewiseFn, basis: Vec<PyPiecewiseFn>) -> PyResult<(f64, Vec<f64>)> {
    let basis: Vec<_> = basis.into_iter().map(|b| b.0).collect();
    let span = resolvent1d::span_distance_star(&tau.0, &basis).map_err(to_py)?;
    Ok((span.distance, span.coeffs))
}

/// `min_a ‖A a − b‖_∞` with `A` given by its columns. Returns `(t, a, active_rows)`.
#[pyfunction]
fn minimax_solve(columns: Vec<Vec<f64>>, target: Vec<f64>) -> PyResult<(f64, Vec<f64>, Vec<usize>)> {
    let problem = MinimaxProblem::from_columns(&columns, target).map_err(to_py)?;
    let sol = minimax::solve(&problem).map_err(to_py)?;
    Ok((sol.deviation, sol.coeffs, sol.active_rows))
}

/// Lattice search over `[-half_width, half_width]^n`, `n ≤ 3`. Returns `(t, a)`.
#[pyfunction]
#[pyo3(signature = (columns, target, half_width = 4.0, step = 1e-3))]
fn minimax_brute_force(
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    half_width: f64,
    step: f64,
) -> PyResult<(f64, Vec<f64>)> {
    let problem = MinimaxProblem::from_columns(&columns, target).map_err(to_py)?;
    let sol = minimax::brute_force(&problem, half_width, step).map_err(to_py)?;
    Ok((sol.deviation, sol.coeffs))
}

/// Snapshot basis selected by the greedy algorithm.
#[pyclass(name = "GreedyResult", frozen)]
struct PyGreedyResult(greedy::GreedyResult);

#[pymethods]
impl PyGreedyResult {
    #[getter]
    fn snapshot_indices(&self) -> Vec<usize> {
        self.0.snapshot_indices.clone()
    }

    #[getter]
    fn snapshots(&self) -> Vec<Vec<f64>> {
        self.0.snapshots.clone()
    }

    #[getter]
    fn decay(&self) -> Vec<f64> {
        self.0.decay.clone()
    }

    #[getter]
    fn basis(&self) -> Vec<PyPiecewiseFn> {
        self.0.basis.iter().cloned().map(PyPiecewiseFn).collect()
    }

    #[getter]
    fn stop_reason(&self) -> String {
        format!("{:?}", self.0.stop_reason).to_lowercase()
    }

    /// Online approximation of `R_τ f` from the basis.
    ///
    /// Returns a dict with the approximate and direct nodal values, the
    /// coefficients and the error report.
    fn online<'py>(&self, py: Python<'py>, tau: &PyPiecewiseFn, f: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let (online, direct, rep) = online_error_report(&self.0, &tau.0, &source(f)?).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("approx", online.approx.nodal().to_vec())?;
        d.set_item("direct", direct.nodal().to_vec())?;
        d.set_item("coeffs", rep.coeffs)?;
        d.set_item("surrogate_err", rep.surrogate_err)?;
        d.set_item("max_derivative_error", rep.max_derivative_error)?;
        d.set_item("max_primitive", rep.max_primitive)?;
        d.set_item("identity_residual", rep.identity_residual)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "GreedyResult(snapshots={}, final_decay={:e})",
            self.0.snapshot_indices.len(),
            self.0.decay.last().copied().unwrap_or(f64::NAN)
        )
    }
}

fn greedy_config(gamma: f64, n_max: usize, eps_stop: f64, weak: bool) -> GreedyConfig {
    GreedyConfig {
        gamma,
        n_max,
        eps_stop,
        scan: if weak { ScanMode::Weak } else { ScanMode::Exact },
    }
}

/// Greedy selection over `base + Σ μ_i modes_i` (or its reciprocal).
#[pyfunction]
#[pyo3(signature = (
    base, modes, points, bounds, reciprocal = true, kind = "diffusivity", dim = "line",
    gamma = 1.0, n_max = 20, eps_stop = 0.0, weak = false
))]
#[allow(clippy::too_many_arguments)]
fn greedy_affine(
    base: Vec<f64>,
    modes: Vec<Vec<f64>>,
    points: Vec<Vec<f64>>,
    bounds: (f64, f64),
    reciprocal: bool,
    kind: &str,
    dim: &str,
    gamma: f64,
    n_max: usize,
    eps_stop: f64,
    weak: bool,
) -> PyResult<PyGreedyResult> {
    let cells = match dim {
        "square" => (base.len() as f64).sqrt().round() as usize,
        _ => base.len(),
    };
    let fam = ParametricFamily::affine(kind_of(kind)?, grid_of(dim, cells)?, base, modes, points, bounds, reciprocal)
        .map_err(to_py)?;
    greedy::greedy_run(&fam, &greedy_config(gamma, n_max, eps_stop, weak))
        .map(PyGreedyResult)
        .map_err(to_py)
}

/// Greedy selection over a tabulated family, one coefficient row per point.
#[pyfunction]
#[pyo3(signature = (
    points, rows, bounds, kind = "diffusivity", dim = "line",
    gamma = 1.0, n_max = 20, eps_stop = 0.0, weak = false
))]
#[allow(clippy::too_many_arguments)]
fn greedy_table(
    points: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
    bounds: (f64, f64),
    kind: &str,
    dim: &str,
    gamma: f64,
    n_max: usize,
    eps_stop: f64,
    weak: bool,
) -> PyResult<PyGreedyResult> {
    let len = rows.first().map_or(0, Vec::len);
    let cells = match dim {
        "square" => (len as f64).sqrt().round() as usize,
        _ => len,
    };
    let fam = ParametricFamily::tabulated(kind_of(kind)?, grid_of(dim, cells)?, points, rows, bounds).map_err(to_py)?;
    greedy::greedy_run(&fam, &greedy_config(gamma, n_max, eps_stop, weak))
        .map(PyGreedyResult)
        .map_err(to_py)
}

/// Discrete `‖R_σ − R_σ̃‖` on the P1 mesh of `[0,1]^dim` with `n` subdivisions per axis.
#[pyfunction]
#[pyo3(signature = (sigma, sigma_tilde, n, tol = 1e-10, max_iter = 10_000, seed = 0))]
fn riesz_opnorm(
    sigma: &PyPiecewiseFn,
    sigma_tilde: &PyPiecewiseFn,
    n: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> PyResult<f64> {
    let mesh = Mesh::new(sigma.0.grid().dim(), n).map_err(to_py)?;
    let a = stability_lab::assemble(&sigma.0, &mesh).map_err(to_py)?;
    let b = stability_lab::assemble(&sigma_tilde.0, &mesh).map_err(to_py)?;
    let opts = PowerOptions { tol, max_iter, seed };
    stability_lab::riesz_opnorm(&a, &b, &opts)
        .map(|e| e.value)
        .map_err(to_py)
}

/// Both sides of the two-sided Lipschitz bound on one mesh, as a dict.
#[pyfunction]
#[pyo3(signature = (sigma, sigma_tilde, bounds, n, seed = 0))]
fn theorem1_check<'py>(
    py: Python<'py>,
    sigma: &PyPiecewiseFn,
    sigma_tilde: &PyPiecewiseFn,
    bounds: (f64, f64),
    n: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let mesh = Mesh::new(sigma.0.grid().dim(), n).map_err(to_py)?;
    let opts = PowerOptions {
        seed,
        ..Default::default()
    };
    let rep = stability_lab::theorem1_check(&sigma.0, &sigma_tilde.0, bounds, &mesh, &opts).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("h", rep.h)?;
    d.set_item("d_inf", rep.d_inf)?;
    d.set_item("d_r", rep.d_r)?;
    d.set_item("lower_ratio", rep.lower_ratio)?;
    d.set_item("upper_ratio", rep.upper_ratio)?;
    d.set_item("upper_deficit", rep.upper_deficit())?;
    d.set_item("lower_pass", rep.lower_pass)?;
    d.set_item("upper_pass", rep.upper_pass)?;
    Ok(d)
}

#[pymodule]
fn resgreedy(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPiecewiseFn>()?;
    m.add_class::<PyGreedyResult>()?;
    m.add_function(wrap_pyfunction!(apply_resolvent, m)?)?;
    m.add_function(wrap_pyfunction!(wm11_norm, m)?)?;
    m.add_function(wrap_pyfunction!(tm_operator_norm, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_star_norm, m)?)?;
    m.add_function(wrap_pyfunction!(resolvent_distance_star, m)?)?;
    m.add_function(wrap_pyfunction!(span_distance_star, m)?)?;
    m.add_function(wrap_pyfunction!(minimax_solve, m)?)?;
    m.add_function(wrap_pyfunction!(minimax_brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_affine, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_table, m)?)?;
    m.add_function(wrap_pyfunction!(riesz_opnorm, m)?)?;
    m.add_function(wrap_pyfunction!(theorem1_check, m)?)?;
    Ok(())
}
