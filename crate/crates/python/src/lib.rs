//! Python bindings: states, single-element estimation, reconstruction and
//! fidelity.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cvtomo::mesh::{Mode, SamplingPlan};
use cvtomo::tomography::ReconstructionConfig;
use cvtomo::{
    CircuitSettings, DensityKernel, Error, QuadratureSpec, RandomStream, RefinementConfig,
};

fn to_py(err: Error) -> PyErr {
    match err {
        Error::InvalidArgument(_) | Error::Parse { .. } => PyValueError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

fn mode_from(mode: &str, shots_epsilon: f64, fail_prob: f64) -> PyResult<Mode> {
    match mode {
        "exact" => Ok(Mode::Exact),
        "sampled" => Ok(Mode::Sampled(SamplingPlan::new(shots_epsilon, fail_prob))),
        other => Err(PyValueError::new_err(format!("mode must be 'exact' or 'sampled', got {other:?}"))),
    }
}

/// Analytic pure state: harmonic-oscillator level or squeezed coherent state.
#[pyclass(name = "PureState", frozen, skip_from_py_object, module = "cvtomo")]
#[derive(Clone)]
struct PyPureState {
    inner: cvtomo::PureState,
}

#[pymethods]
impl PyPureState {
    #[staticmethod]
    fn oscillator(n: u32) -> PyResult<Self> {
        cvtomo::PureState::oscillator(n).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (mean_x, mean_p, sigma))]
    fn squeezed(mean_x: f64, mean_p: f64, sigma: f64) -> PyResult<Self> {
        cvtomo::PureState::squeezed(mean_x, mean_p, sigma)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Parses `oscillator:<n>` or `squeezed:<mean_x>,<mean_p>,<sigma>`.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        text.parse().map(|inner| Self { inner }).map_err(to_py)
    }

    fn wavefunction(&self, x: f64) -> Complex64 {
        self.inner.wavefunction(x)
    }

    fn density(&self, x: f64, xp: f64) -> Complex64 {
        self.inner.density(x, xp)
    }

    fn diagonal_weight(&self, a: f64, b: f64) -> PyResult<f64> {
        cvtomo::diagonal_weight(&self.inner, a, b, &QuadratureSpec::default()).map_err(to_py)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("PureState.parse({:?})", self.inner.to_string())
    }
}

/// Piecewise-constant reconstruction of rho(x, x').
#[pyclass(name = "Reconstruction", frozen, module = "cvtomo")]
struct PyReconstruction {
    inner: cvtomo::ReconstructedState,
}

#[pymethods]
impl PyReconstruction {
    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta()
    }

    #[getter]
    fn total_shots(&self) -> u64 {
        self.inner.total_shots()
    }

    fn edges(&self) -> Vec<f64> {
        self.inner.partition().edges()
    }

    fn cell(&self, i: usize, j: usize) -> PyResult<Complex64> {
        let n = self.inner.size();
        if i >= n || j >= n {
            return Err(PyValueError::new_err(format!("cell ({i}, {j}) outside a {n}x{n} grid")));
        }
        Ok(self.inner.cell(i, j))
    }

    fn evaluate(&self, x: f64, xp: f64) -> Complex64 {
        self.inner.evaluate(x, xp)
    }

    fn fidelity(&self, state: &PyPureState) -> PyResult<f64> {
        cvtomo::fidelity(&self.inner, &state.inner, &QuadratureSpec::default())
            .map(|r| r.fidelity)
            .map_err(to_py)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        serde_json::from_str(text)
            .map(|inner| Self { inner })
            .map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        cvtomo::io::write_cells_csv(&self.inner, &mut buf).map_err(to_py)?;
        String::from_utf8(buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))
    }
}

#[pyfunction]
fn hermite(n: u32, x: f64) -> f64 {
    cvtomo::hermite_eval(n, x)
}

#[pyfunction]
fn chernoff_condition_shots(epsilon: f64, fail_prob: f64) -> PyResult<u64> {
    cvtomo::chernoff_condition_shots(epsilon, fail_prob).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (epsilon, fail_prob, delta, r = 0.0, rp = 0.0))]
fn chernoff_estimate_shots(epsilon: f64, fail_prob: f64, delta: f64, r: f64, rp: f64) -> PyResult<u64> {
    cvtomo::chernoff_estimate_shots(epsilon, fail_prob, delta, r, rp).map_err(to_py)
}

/// Noise-free circuit estimate at explicit settings.
#[pyfunction]
#[pyo3(signature = (state, x, xp, r = 0.0, rp = 0.0, delta = 0.1))]
fn exact_estimate(state: &PyPureState, x: f64, xp: f64, r: f64, rp: f64, delta: f64) -> PyResult<Complex64> {
    let s = CircuitSettings::new(x, xp, r, rp, delta).map_err(to_py)?;
    cvtomo::exact_estimate(&state.inner, &s, &QuadratureSpec::default()).map_err(to_py)
}

/// Outcome probabilities `{"p_plus", "p_minus", "p_noclick"}` for axis "x" or "y".
#[pyfunction]
#[pyo3(signature = (state, x, xp, r = 0.0, rp = 0.0, delta = 0.1, axis = "x"))]
#[allow(clippy::too_many_arguments)]
fn outcome_distribution<'py>(
    py: Python<'py>,
    state: &PyPureState,
    x: f64,
    xp: f64,
    r: f64,
    rp: f64,
    delta: f64,
    axis: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let axis = match axis {
        "x" => cvtomo::Axis::X,
        "y" => cvtomo::Axis::Y,
        other => return Err(PyValueError::new_err(format!("axis must be 'x' or 'y', got {other:?}"))),
    };
    let s = CircuitSettings::new(x, xp, r, rp, delta).map_err(to_py)?;
    let d = cvtomo::outcome_distribution(&state.inner, &s, axis, &QuadratureSpec::default()).map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("p_plus", d.p_plus)?;
    out.set_item("p_minus", d.p_minus)?;
    out.set_item("p_noclick", d.p_noclick)?;
    Ok(out)
}

/// Selective estimate of rho(x, x'); returns value, squeezings and shots.
#[pyfunction]
#[pyo3(signature = (state, x, xp, delta = 0.1, epsilon = 0.01, mode = "exact", shots_epsilon = 0.1, fail_prob = 0.05, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn estimate_element<'py>(
    py: Python<'py>,
    state: &PyPureState,
    x: f64,
    xp: f64,
    delta: f64,
    epsilon: f64,
    mode: &str,
    shots_epsilon: f64,
    fail_prob: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RefinementConfig::new(epsilon)
        .map_err(to_py)?
        .with_mode(mode_from(mode, shots_epsilon, fail_prob)?);
    cfg.validate().map_err(to_py)?;
    let inner = state.inner;
    let e = py
        .detach(move || {
            let mut stream = RandomStream::new(seed, 0);
            cvtomo::estimate_element(&inner, x, xp, delta, epsilon, &cfg, &mut stream)
        })
        .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("value", e.value)?;
    out.set_item("r", e.r)?;
    out.set_item("rp", e.rp)?;
    out.set_item("shots", e.shots_used)?;
    out.set_item("condition_shots", e.selection.condition_shots_used)?;
    Ok(out)
}

/// Full reconstruction on the adaptive mesh.
#[pyfunction]
#[pyo3(signature = (state, epsilon = 0.01, delta = 0.1, mode = "exact", shots_epsilon = 0.1, fail_prob = 0.05, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn reconstruct(
    py: Python<'_>,
    state: &PyPureState,
    epsilon: f64,
    delta: f64,
    mode: &str,
    shots_epsilon: f64,
    fail_prob: f64,
    seed: u64,
) -> PyResult<PyReconstruction> {
    let refinement = RefinementConfig::new(epsilon)
        .map_err(to_py)?
        .with_mode(mode_from(mode, shots_epsilon, fail_prob)?);
    refinement.validate().map_err(to_py)?;
    let mut config = ReconstructionConfig::new(refinement, delta);
    config.seed = seed;
    let inner = state.inner;
    py.detach(move || cvtomo::reconstruct(&inner, &config))
        .map(|inner| PyReconstruction { inner })
        .map_err(to_py)
}

#[pymodule]
#[pyo3(name = "cvtomo")]
fn cvtomo_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPureState>()?;
    m.add_class::<PyReconstruction>()?;
    m.add_function(wrap_pyfunction!(hermite, m)?)?;
    m.add_function(wrap_pyfunction!(chernoff_condition_shots, m)?)?;
    m.add_function(wrap_pyfunction!(chernoff_estimate_shots, m)?)?;
    m.add_function(wrap_pyfunction!(exact_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(outcome_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_element, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    Ok(())
}
