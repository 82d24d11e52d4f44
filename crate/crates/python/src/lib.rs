//! Python bindings for `hum_tracking`.

use std::path::PathBuf;

use hum_tracking::dual::{minimize_dual, DualForcing, TrackingProblem};
use hum_tracking::error::Error;
use hum_tracking::experiments::{
    example_configs, run_example, run_obstruction, ExampleOverrides, ExperimentConfig, ObstructionSetup,
    ObstructionVariant, TrajectorySpec,
};
use hum_tracking::fem::{GridSignal, TimeGrid};
use hum_tracking::flatness::{build_series, Polynomial, SeriesSolution, SeriesTarget};
use hum_tracking::moving::{build_double_diffeo, build_single_diffeo, DiffeoMap};
use hum_tracking::optim::OptimOptions;
use hum_tracking::solvers::BoundaryControls;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::Singular { .. } | Error::SmoothingRequired | Error::Construction(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Converts a serializable value into Python objects through `json.loads`.
fn to_object<T: serde::Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn options_from_json(json: Option<&str>) -> PyResult<OptimOptions> {
    let opts: OptimOptions = match json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("optimizer: {e}")))?,
        None => OptimOptions::default(),
    };
    opts.validate().map_err(to_py)?;
    Ok(opts)
}

/// `(left, right)` control samples.
type ControlPair = (Option<Vec<f64>>, Option<Vec<f64>>);

/// Discretized dual tracking problem.
#[pyclass(name = "TrackingProblem", module = "hum_tracking_py", frozen)]
struct PyTrackingProblem {
    inner: TrackingProblem,
    optimizer: OptimOptions,
}

impl PyTrackingProblem {
    fn forcing(&self, f: Vec<f64>) -> PyResult<DualForcing> {
        let count = self.inner.observations().len();
        let forcing = DualForcing::from_flat(&f, count).map_err(to_py)?;
        forcing.validate(self.inner.observations(), self.inner.grid()).map_err(to_py)?;
        Ok(forcing)
    }

    fn from_config(cfg: &ExperimentConfig) -> PyResult<Self> {
        Ok(Self { inner: cfg.problem().map_err(to_py)?, optimizer: cfg.optimizer.clone() })
    }
}

#[pymethods]
impl PyTrackingProblem {
    /// Builtin example `n` in 1..=4 (the first ε for example 1).
    #[staticmethod]
    #[pyo3(signature = (n, eps=None, ne=None, nt=None))]
    fn example(n: u8, eps: Option<f64>, ne: Option<usize>, nt: Option<usize>) -> PyResult<Self> {
        let overrides = ExampleOverrides { epsilon: eps, elements: ne, steps: nt };
        let configs = example_configs(n, overrides).map_err(to_py)?;
        Self::from_config(&configs[0])
    }

    /// Problem described by a JSON experiment config.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Self::from_config(&ExperimentConfig::from_json(text).map_err(to_py)?)
    }

    #[getter]
    fn unknowns(&self) -> usize {
        self.inner.unknowns()
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.grid().solve_times()
    }

    /// Dual functional at the flattened forcing `f` (observation-major).
    fn evaluate_j(&self, f: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate_j(&self.forcing(f)?).map_err(to_py)
    }

    fn evaluate_gradient(&self, f: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.evaluate_gradient(&self.forcing(f)?).map_err(to_py)?.flatten())
    }

    /// Minimizes the dual functional. `options` is an optimizer JSON object;
    /// the problem's own settings apply when omitted.
    /// Returns `(f, report)`.
    #[pyo3(signature = (options=None))]
    fn minimize(&self, py: Python<'_>, options: Option<&str>) -> PyResult<(Vec<f64>, Py<PyAny>)> {
        let opts = match options {
            Some(_) => options_from_json(options)?,
            None => self.optimizer.clone(),
        };
        let (f, report) = py.detach(|| minimize_dual(&self.inner, &opts)).map_err(to_py)?;
        Ok((f.flatten(), to_object(py, &report)?))
    }

    /// Boundary controls `(left, right)` recovered from `f`; absent sides are `None`.
    fn recover_controls(&self, f: Vec<f64>) -> PyResult<ControlPair> {
        let c = self.inner.recover_controls(&self.forcing(f)?).map_err(to_py)?;
        Ok((c.left.map(|s| s.0), c.right.map(|s| s.0)))
    }

    /// Observation traces of the forward solve driven by the given controls.
    #[pyo3(signature = (left=None, right=None))]
    fn traces(&self, left: Option<Vec<f64>>, right: Option<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let controls = BoundaryControls { left: left.map(GridSignal), right: right.map(GridSignal) };
        Ok(self.inner.traces(&controls).map_err(to_py)?.into_iter().map(|s| s.0).collect())
    }

    /// `(per_target, combined)` tracking errors for the given controls.
    #[pyo3(signature = (left=None, right=None))]
    fn tracking_error(&self, left: Option<Vec<f64>>, right: Option<Vec<f64>>) -> PyResult<(Vec<f64>, f64)> {
        let controls = BoundaryControls { left: left.map(GridSignal), right: right.map(GridSignal) };
        let e = self.inner.tracking_error(&controls).map_err(to_py)?;
        Ok((e.per_target, e.combined))
    }
}

/// Runs builtin example `n`, writes its artifacts to `out`, and returns the run summaries.
#[pyfunction]
#[pyo3(signature = (n, out, eps=None, ne=None, nt=None))]
fn run_builtin_example(
    py: Python<'_>,
    n: u8,
    out: PathBuf,
    eps: Option<f64>,
    ne: Option<usize>,
    nt: Option<usize>,
) -> PyResult<Py<PyAny>> {
    let overrides = ExampleOverrides { epsilon: eps, elements: ne, steps: nt };
    let summaries = py.detach(|| run_example(n, overrides, &out)).map_err(to_py)?;
    to_object(py, &summaries)
}

/// Builds a dual forcing with vanishing boundary flux for the named variant.
#[pyfunction]
#[pyo3(signature = (variant, ne=100))]
fn obstruction(py: Python<'_>, variant: &str, ne: usize) -> PyResult<Py<PyAny>> {
    let v: ObstructionVariant = variant.parse().map_err(to_py)?;
    let report = run_obstruction(v, &ObstructionSetup::standard(v, ne)).map_err(to_py)?;
    to_object(py, &report)
}

/// Straightening map for a moving point.
#[pyclass(name = "DiffeoMap", module = "hum_tracking_py", frozen)]
struct PyDiffeoMap {
    inner: DiffeoMap,
}

#[pymethods]
impl PyDiffeoMap {
    /// `traj` is `constant:<v>` or `sine:<center>:<amplitude>`; `double` adds a fixed second point.
    #[new]
    #[pyo3(signature = (traj, horizon=0.5, nt=500, double=None, length=1.0))]
    fn new(traj: &str, horizon: f64, nt: usize, double: Option<f64>, length: f64) -> PyResult<Self> {
        let spec: TrajectorySpec = traj.parse().map_err(to_py)?;
        let h = spec.build(horizon).map_err(to_py)?;
        let grid = TimeGrid::new(horizon, nt).map_err(to_py)?;
        let inner = match double {
            Some(k) => build_double_diffeo(k, &h, &grid, length),
            None => build_single_diffeo(&h, &grid, length),
        }
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn apply(&self, t: f64, x: f64) -> f64 {
        self.inner.apply(t, x)
    }

    fn invert(&self, t: f64, xi: f64) -> f64 {
        self.inner.invert(t, xi)
    }

    /// Polynomial coefficients at time `t`, highest exponent first.
    fn coefficients(&self, t: f64) -> Vec<f64> {
        self.inner.coefficients(t)
    }

    /// Images of the straightened points.
    fn targets(&self) -> Vec<f64> {
        self.inner.targets()
    }

    fn trajectory(&self, t: f64) -> f64 {
        self.inner.trajectory().eval(t)
    }
}

/// Power-series heat solution matching `y(t, x₁) = w1(t)` and `∂ₓy(t, x₁) = w2(t)`.
#[pyclass(name = "Series", module = "hum_tracking_py", frozen)]
struct PySeries {
    inner: SeriesSolution,
}

#[pymethods]
impl PySeries {
    /// `w1`, `w2` are polynomial coefficients in increasing degree.
    #[new]
    #[pyo3(signature = (w1, w2, anchor, order))]
    fn new(w1: Vec<f64>, w2: Vec<f64>, anchor: f64, order: usize) -> PyResult<Self> {
        let targets = SeriesTarget { w1: Polynomial(w1), w2: Polynomial(w2) };
        Ok(Self { inner: build_series(&targets, anchor, order).map_err(to_py)? })
    }

    fn eval(&self, t: f64, x: f64) -> f64 {
        self.inner.eval(t, x)
    }

    fn dx(&self, t: f64, x: f64) -> f64 {
        self.inner.dx(t, x)
    }

    fn residual(&self, t: f64, x: f64) -> f64 {
        self.inner.residual(t, x)
    }
}

#[pymodule]
fn hum_tracking_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTrackingProblem>()?;
    m.add_class::<PyDiffeoMap>()?;
    m.add_class::<PySeries>()?;
    m.add_function(wrap_pyfunction!(run_builtin_example, m)?)?;
    m.add_function(wrap_pyfunction!(obstruction, m)?)?;
    Ok(())
}
