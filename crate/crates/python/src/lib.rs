//! Python bindings: `import ltesim`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};

use ltesim::estimation::{
    lmmse_estimate, lr_lmmse_estimate, ls_estimate, CorrelationModel, EstimatorConfig,
    EstimatorKind, PilotObservation,
};
use ltesim::grid::{self, PilotPattern};
use ltesim::harness::{ExperimentSettings, Simulator, TrialSeeds};
use ltesim::mimo_link;
use ltesim::ofdm::{self, GuardConfig, GuardScheme};
use ltesim::Complex64;

fn to_py(e: ltesim::Error) -> PyErr {
    match e {
        ltesim::Error::Config(_) | ltesim::Error::Mapping(_) | ltesim::Error::Shape(_) => {
            PyValueError::new_err(e.to_string())
        }
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn grid_for(bandwidth_mhz: f64) -> PyResult<grid::GridConfig> {
    grid::GridConfig::for_bandwidth_mhz(bandwidth_mhz).map_err(to_py)
}

fn guard(scheme: &str, len: usize) -> PyResult<GuardConfig> {
    Ok(GuardConfig::new(
        scheme.parse::<GuardScheme>().map_err(to_py)?,
        len,
    ))
}

/// Resource-grid parameters of one LTE bandwidth.
#[pyclass(name = "GridConfig", frozen, from_py_object)]
#[derive(Clone)]
struct PyGridConfig {
    inner: grid::GridConfig,
}

#[pymethods]
impl PyGridConfig {
    #[new]
    fn new(bandwidth_mhz: f64) -> PyResult<Self> {
        Ok(PyGridConfig {
            inner: grid_for(bandwidth_mhz)?,
        })
    }

    #[getter]
    fn bandwidth_mhz(&self) -> f64 {
        self.inner.bandwidth.mhz()
    }
    #[getter]
    fn fft_size(&self) -> usize {
        self.inner.fft_size
    }
    #[getter]
    fn occupied_subcarriers(&self) -> usize {
        self.inner.occupied_subcarriers
    }
    #[getter]
    fn prb_count(&self) -> usize {
        self.inner.prb_count
    }
    #[getter]
    fn sampling_rate_hz(&self) -> f64 {
        self.inner.sampling_rate_hz
    }
    #[getter]
    fn guard_len(&self) -> usize {
        self.inner.guard_len
    }
    #[getter]
    fn symbols_per_slot(&self) -> usize {
        self.inner.symbols_per_slot
    }

    fn __repr__(&self) -> String {
        format!(
            "GridConfig(bandwidth_mhz={}, fft_size={}, occupied_subcarriers={}, prb_count={}, guard_len={})",
            self.inner.bandwidth, self.inner.fft_size, self.inner.occupied_subcarriers,
            self.inner.prb_count, self.inner.guard_len
        )
    }
}

#[pyfunction]
fn lookup_grid_config(bandwidth_mhz: f64) -> PyResult<PyGridConfig> {
    PyGridConfig::new(bandwidth_mhz)
}

#[pyfunction]
#[pyo3(signature = (k, bandwidth_mhz=5.0))]
fn subcarrier_to_bin(k: usize, bandwidth_mhz: f64) -> PyResult<usize> {
    grid::subcarrier_to_bin(k, &grid_for(bandwidth_mhz)?).map_err(to_py)
}

/// (symbol, subcarrier) pilot cells of `port` in one slot, default pattern.
#[pyfunction]
#[pyo3(signature = (slot, port, bandwidth_mhz=5.0, ports=2))]
fn pilot_positions(
    slot: usize,
    port: usize,
    bandwidth_mhz: f64,
    ports: usize,
) -> PyResult<Vec<(usize, usize)>> {
    let pattern = PilotPattern::lte_default(ports).map_err(to_py)?;
    if port >= ports {
        return Err(PyValueError::new_err(format!(
            "port {port} out of range for {ports} ports"
        )));
    }
    Ok(grid::pilot_positions(
        slot,
        port,
        &pattern,
        &grid_for(bandwidth_mhz)?,
    ))
}

#[pyfunction]
fn ofdm_modulate(freq_bins: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    ofdm::ofdm_modulate(&freq_bins).map_err(to_py)
}

#[pyfunction]
fn ofdm_demodulate(samples: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    ofdm::ofdm_demodulate(&samples).map_err(to_py)
}

#[pyfunction]
fn add_guard(x: Vec<Complex64>, scheme: &str, guard_len: usize) -> PyResult<Vec<Complex64>> {
    ofdm::add_guard(&x, guard(scheme, guard_len)?).map_err(to_py)
}

#[pyfunction]
fn strip_guard(
    y: Vec<Complex64>,
    n: usize,
    scheme: &str,
    guard_len: usize,
) -> PyResult<Vec<Complex64>> {
    ofdm::strip_guard(&y, n, guard(scheme, guard_len)?).map_err(to_py)
}

#[pyfunction]
fn qpsk_map(bits: Vec<u8>) -> PyResult<Vec<Complex64>> {
    mimo_link::qpsk_map(&bits).map_err(to_py)
}

#[pyfunction]
fn qpsk_demap(symbols: Vec<Complex64>) -> Vec<u32> {
    // u32 so Python gets a list of ints rather than bytes
    mimo_link::qpsk_demap(&symbols)
        .into_iter()
        .map(u32::from)
        .collect()
}

/// Zero-forcing for one subcarrier; `h` is row-major `n_rx x n_tx`.
/// Returns None when the matrix is too ill-conditioned.
#[pyfunction]
fn zf_detect(
    y: Vec<Complex64>,
    h: Vec<Complex64>,
    n_tx: usize,
) -> PyResult<Option<Vec<Complex64>>> {
    mimo_link::zf_detect(&y, &h, n_tx).map_err(to_py)
}

#[pyfunction]
#[pyo3(name = "ls_estimate")]
fn py_ls_estimate(received: Vec<Complex64>, pilots: Vec<Complex64>) -> PyResult<Vec<Complex64>> {
    let positions = (0..pilots.len()).map(|i| (0, i)).collect();
    ls_estimate(&PilotObservation {
        received,
        pilots,
        positions,
    })
    .map_err(to_py)
}

/// Smooth LS estimates taken on occupied `subcarriers` with the LMMSE filter
/// (`rank=None`) or its low-rank form.
#[pyfunction]
#[pyo3(signature = (h_ls, subcarriers, snr, taps=8, rank=None, beta=1.0, bandwidth_mhz=5.0))]
fn lmmse_smooth(
    h_ls: Vec<Complex64>,
    subcarriers: Vec<usize>,
    snr: f64,
    taps: usize,
    rank: Option<usize>,
    beta: f64,
    bandwidth_mhz: f64,
) -> PyResult<Vec<Complex64>> {
    let cfg = grid_for(bandwidth_mhz)?;
    let model = CorrelationModel::for_subcarriers(&subcarriers, taps, &cfg).map_err(to_py)?;
    match rank {
        None => {
            let est = EstimatorConfig::new(EstimatorKind::Lmmse, beta, snr, model.size())
                .map_err(to_py)?;
            lmmse_estimate(&h_ls, &model, &est).map_err(to_py)
        }
        Some(p) => {
            let est = EstimatorConfig::new(EstimatorKind::LrLmmse, beta, snr, p).map_err(to_py)?;
            lr_lmmse_estimate(&h_ls, &model, &est).map_err(to_py)
        }
    }
}

fn settings_from(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<ExperimentSettings> {
    let mut s = ExperimentSettings::default();
    if let Some(kw) = kwargs {
        for (k, v) in kw.iter() {
            let key: String = k.extract()?;
            let value = if v.is_instance_of::<PyBool>() {
                v.extract::<bool>()?.to_string()
            } else if let Ok(list) = v.extract::<Vec<String>>() {
                list.join(",")
            } else if let Ok(list) = v.extract::<Vec<f64>>() {
                list.iter()
                    .map(f64::to_string)
                    .collect::<Vec<_>>()
                    .join(",")
            } else {
                v.str()?.to_string()
            };
            s.set(&key.replace('_', "-"), &value).map_err(to_py)?;
        }
    }
    Ok(s)
}

/// Run a sweep. Keyword arguments mirror the CLI flags with underscores,
/// e.g. `sweep(frames=2, snr_db=[0, 10], schemes=["cp"])`. Returns one dict
/// per (scheme, estimator, snr) record.
#[pyfunction]
#[pyo3(signature = (**kwargs))]
fn sweep(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<Vec<Py<PyDict>>> {
    let cfg = settings_from(kwargs)?.to_config().map_err(to_py)?;
    let result = py.detach(|| ltesim::harness::sweep(&cfg)).map_err(to_py)?;
    result
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("scheme", r.scheme.label())?;
            d.set_item("estimator", r.estimator.label())?;
            d.set_item("snr_db", r.snr_db)?;
            d.set_item("mse_pilot", r.mse_pilot)?;
            d.set_item("mse_grid", r.mse_grid)?;
            d.set_item("ber", r.ber)?;
            d.set_item("trials", r.trials)?;
            d.set_item("bit_count", r.bit_count)?;
            Ok(d.unbind())
        })
        .collect()
}

/// One subframe end to end. Returns a dict per estimator.
#[pyfunction]
#[pyo3(signature = (scheme, snr_db, seed=0, **kwargs))]
fn run_trial(
    py: Python<'_>,
    scheme: &str,
    snr_db: f64,
    seed: u64,
    kwargs: Option<&Bound<'_, PyDict>>,
) -> PyResult<Vec<Py<PyDict>>> {
    let cfg = settings_from(kwargs)?.to_config().map_err(to_py)?;
    let scheme = scheme.parse::<GuardScheme>().map_err(to_py)?;
    let out = py
        .detach(|| {
            let sim = Simulator::new(cfg)?;
            let point = sim.prepare_point(scheme, snr_db)?;
            sim.run_trial(&point, TrialSeeds::from_seed(seed))
        })
        .map_err(to_py)?;
    out.estimators
        .iter()
        .map(|o| {
            let d = PyDict::new(py);
            d.set_item("estimator", o.kind.label())?;
            d.set_item("mse_pilot", o.mse_pilot())?;
            d.set_item("mse_grid", o.mse_grid())?;
            d.set_item("bit_errors", o.bit_errors)?;
            d.set_item("bits", o.bits)?;
            Ok(d.unbind())
        })
        .collect()
}

#[pymodule]
#[pyo3(name = "ltesim")]
fn ltesim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGridConfig>()?;
    m.add_function(wrap_pyfunction!(lookup_grid_config, m)?)?;
    m.add_function(wrap_pyfunction!(subcarrier_to_bin, m)?)?;
    m.add_function(wrap_pyfunction!(pilot_positions, m)?)?;
    m.add_function(wrap_pyfunction!(ofdm_modulate, m)?)?;
    m.add_function(wrap_pyfunction!(ofdm_demodulate, m)?)?;
    m.add_function(wrap_pyfunction!(add_guard, m)?)?;
    m.add_function(wrap_pyfunction!(strip_guard, m)?)?;
    m.add_function(wrap_pyfunction!(qpsk_map, m)?)?;
    m.add_function(wrap_pyfunction!(qpsk_demap, m)?)?;
    m.add_function(wrap_pyfunction!(zf_detect, m)?)?;
    m.add_function(wrap_pyfunction!(py_ls_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(lmmse_smooth, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(run_trial, m)?)?;
    Ok(())
}
