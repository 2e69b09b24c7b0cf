//! Python bindings for `spinsense`.
//!
//! Matrices cross the boundary as nested lists of complex numbers; FIDs as
//! flat lists. Errors surface as `ValueError`.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use spinsense::acquisition::{extract_peak_phases, fit_decay, spectrum as dft_spectrum, Fid};
use spinsense::experiments::line_centers;
use spinsense::gates::{pseudo_cnot as cnot, pseudo_cnot_reference as cnot_reference};
use spinsense::hamiltonian::EntanglingMode;
use spinsense::noise::{DecouplingMode, SampleSpec};
use spinsense::pulseprog::{self, Builtin, BuiltinParams};
use spinsense::sim::{run_program, InitialState, SimConfig};
use spinsense::spin::CMatrix;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn entangling_mode(s: &str) -> PyResult<EntanglingMode> {
    match s {
        "ideal" => Ok(EntanglingMode::Ideal),
        "quantized" => Ok(EntanglingMode::Quantized),
        _ => Err(err(format!("unknown entangling mode `{s}` (ideal|quantized)"))),
    }
}

fn parse_source(source: &str) -> PyResult<pulseprog::PulseProgram> {
    pulseprog::parse(source).map_err(|d| err(d.render(source, "<program>")))
}

/// A spin register: labels, species, offsets and couplings.
#[pyclass(name = "SpinSystem", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PySpinSystem {
    inner: spinsense::spin::SpinSystem,
}

#[pymethods]
impl PySpinSystem {
    /// The default 2-propanol register.
    #[staticmethod]
    fn two_propanol() -> Self {
        PySpinSystem { inner: spinsense::spin::SpinSystem::two_propanol() }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PySpinSystem { inner: spinsense::spin::SpinSystem::from_toml_str(text).map_err(err)? })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Coupling between two spins in rad/s.
    fn coupling(&self, a: &str, b: &str) -> PyResult<f64> {
        self.inner.coupling_between(a, b).map_err(err)
    }

    /// A register restricted to `keep`, in roster order.
    fn subsystem(&self, keep: Vec<String>) -> PyResult<Self> {
        let keep: Vec<&str> = keep.iter().map(String::as_str).collect();
        Ok(PySpinSystem { inner: self.inner.subsystem(&keep).map_err(err)? })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("SpinSystem({:?}, labels={:?})", self.inner.name(), self.inner.labels())
    }
}

/// Result of running a pulse program.
#[pyclass(name = "RunResult", frozen)]
struct PyRunResult {
    #[pyo3(get)]
    fid: Vec<Complex64>,
    #[pyo3(get)]
    dwell_s: f64,
    #[pyo3(get)]
    first_sample: Complex64,
    #[pyo3(get)]
    labels: Vec<String>,
    #[pyo3(get)]
    final_state: Vec<Vec<Complex64>>,
    #[pyo3(get)]
    min_eigenvalue: f64,
    /// `(center_rad_s, phase_deg, amplitude)` for the three center-spin lines.
    #[pyo3(get)]
    peaks: Vec<(f64, f64, f64)>,
}

#[pymethods]
impl PyRunResult {
    fn __repr__(&self) -> String {
        format!("RunResult(points={}, labels={:?}, peaks={:?})", self.fid.len(), self.labels, self.peaks)
    }
}

/// The pseudo-CNOT on the CC/CS1/CS2 register built from its gate sequence.
#[pyfunction]
#[pyo3(signature = (system = None, mode = "ideal"))]
fn pseudo_cnot(system: Option<&PySpinSystem>, mode: &str) -> PyResult<Vec<Vec<Complex64>>> {
    let mol = system.map(|s| s.inner.clone()).unwrap_or_else(spinsense::spin::SpinSystem::two_propanol);
    let reg = mol.subsystem(&["CC", "CS1", "CS2"]).map_err(err)?;
    let u = cnot(&reg, entangling_mode(mode)?).map_err(err)?;
    Ok(rows(u.matrix()))
}

/// The closed-form 8x8 pseudo-CNOT.
#[pyfunction]
fn pseudo_cnot_reference() -> Vec<Vec<Complex64>> {
    rows(cnot_reference().matrix())
}

/// Parses a program and returns its canonical text.
#[pyfunction]
fn canonical(source: &str) -> PyResult<String> {
    Ok(pulseprog::print(&parse_source(source)?))
}

/// Emits a builtin sequence as program text.
#[pyfunction]
#[pyo3(signature = (name, theta_deg = 0.0, decoupling = "full", tau_ms = 3.4, cycles = 1, points = 4096, dwell_ms = 2.0))]
fn builtin(
    name: &str,
    theta_deg: f64,
    decoupling: &str,
    tau_ms: f64,
    cycles: u32,
    points: usize,
    dwell_ms: f64,
) -> PyResult<String> {
    let which: Builtin = name.parse().map_err(err)?;
    let decoupling: DecouplingMode = decoupling.parse().map_err(err)?;
    let params = BuiltinParams { theta_deg, tau_ms, n_cycles: cycles, decoupling, points, dwell_ms, ..Default::default() };
    let program = pulseprog::builtin_sequence(&spinsense::spin::SpinSystem::two_propanol(), which, &params).map_err(err)?;
    Ok(pulseprog::print(&program))
}

/// Runs program text on the molecule. `sample` is a preset name
/// (`sample1`..`sample4`) or `"none"` for a noiseless run.
#[pyfunction]
#[pyo3(signature = (source, sample = "none", system = None, initial = "thermal", receiver_offset_hz = 100.0))]
fn run(
    py: Python<'_>,
    source: &str,
    sample: &str,
    system: Option<&PySpinSystem>,
    initial: &str,
    receiver_offset_hz: f64,
) -> PyResult<PyRunResult> {
    let program = parse_source(source)?;
    let mol = system.map(|s| s.inner.clone()).unwrap_or_else(spinsense::spin::SpinSystem::two_propanol);
    let mut cfg = SimConfig::new(mol);
    if sample != "none" {
        cfg = cfg.with_sample(SampleSpec::preset_named(sample).map_err(err)?);
    }
    cfg.receiver_offset = std::f64::consts::TAU * receiver_offset_hz;
    let initial: InitialState = initial.parse().map_err(err)?;
    let out = py.detach(|| run_program(&program, &cfg, &initial)).map_err(err)?;

    let mut peaks = Vec::new();
    if let (Some(fid), Ok(j)) = (&out.fid, out.register.coupling_between("CC", "CS1")) {
        let spec = dft_spectrum(fid, 2).map_err(err)?;
        if let Ok(p) = extract_peak_phases(&spec, &line_centers(cfg.receiver_offset, j), j / 4.0) {
            peaks = p.iter().map(|k| (k.center, k.phase.to_degrees(), k.amplitude)).collect();
        }
    }
    Ok(PyRunResult {
        fid: out.fid.as_ref().map(|f| f.samples().to_vec()).unwrap_or_default(),
        dwell_s: out.fid.as_ref().map_or(0.0, Fid::dwell_s),
        first_sample: out.first_sample,
        labels: out.final_state.labels().to_vec(),
        final_state: rows(out.final_state.matrix()),
        min_eigenvalue: out.final_state.min_eigenvalue(),
        peaks,
    })
}

/// DFT of an FID: `(freqs_rad_s, bins)`, zero-filled to `zero_fill` times
/// its length.
#[pyfunction]
#[pyo3(signature = (fid, dwell_s, zero_fill = 1))]
fn spectrum(fid: Vec<Complex64>, dwell_s: f64, zero_fill: usize) -> PyResult<(Vec<f64>, Vec<Complex64>)> {
    let fid = Fid::new(fid, dwell_s, 0.0).map_err(err)?;
    let s = dft_spectrum(&fid, zero_fill).map_err(err)?;
    Ok((s.freqs().to_vec(), s.bins().to_vec()))
}

/// Line phases in degrees at `centers` (rad/s), with leakage between
/// windows removed.
#[pyfunction]
fn line_phases(fid: Vec<Complex64>, dwell_s: f64, centers: Vec<f64>, half_width: f64) -> PyResult<Vec<f64>> {
    let fid = Fid::new(fid, dwell_s, 0.0).map_err(err)?;
    let s = dft_spectrum(&fid, 2).map_err(err)?;
    let p = extract_peak_phases(&s, &centers, half_width).map_err(err)?;
    Ok(p.iter().map(|k| k.phase.to_degrees()).collect())
}

/// Fits exponential and stretched decays. Returns a dict with `model`,
/// `time_constant`, `beta`, `score` and `amplitude`.
#[pyfunction]
fn fit(py: Python<'_>, t: Vec<f64>, y: Vec<f64>) -> PyResult<Py<pyo3::types::PyDict>> {
    let f = fit_decay(&t, &y).map_err(err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("model", f.model.as_str())?;
    d.set_item("time_constant", f.exponential.time_constant)?;
    d.set_item("amplitude", f.exponential.amplitude)?;
    d.set_item("stretched_time_constant", f.stretched.time_constant)?;
    d.set_item("beta", f.stretched.beta)?;
    d.set_item("score", f.score)?;
    Ok(d.unbind())
}

#[pymodule]
fn spinsense_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpinSystem>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(pseudo_cnot, m)?)?;
    m.add_function(wrap_pyfunction!(pseudo_cnot_reference, m)?)?;
    m.add_function(wrap_pyfunction!(canonical, m)?)?;
    m.add_function(wrap_pyfunction!(builtin, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(line_phases, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
