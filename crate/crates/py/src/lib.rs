//! Python bindings: the dimer model, circuit sampling, QAVG fits and spectra.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use qavg_core::circuits::{QpeSettings, RteMode, Variant};
use qavg_core::fci::FciReport;
use qavg_core::fit::{qpe_kernel, TrialParams};
use qavg_core::histogram::Histogram;
use qavg_core::model::{qubit_hamiltonian, DimerParams, Orbital, Sector};
use qavg_core::pipeline::{RunConfig, Workflow};
use qavg_core::simulator::NoiseModel;
use qavg_core::spectra::{reconstruct_gf, EnergyGrid};
use qavg_core::steane::bfc_decode;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Converts any serializable value into plain Python objects.
fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn sector(s: &str) -> PyResult<Sector> {
    Sector::parse(s).map_err(err)
}

/// One measured (or exact) outcome distribution.
#[pyclass(name = "Histogram", module = "qavg", frozen, from_py_object)]
#[derive(Clone)]
struct PyHistogram {
    inner: Histogram,
}

#[pymethods]
impl PyHistogram {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyHistogram { inner: Histogram::from_json(text).map_err(err)? })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(PyHistogram { inner: Histogram::read(path).map_err(err)? })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    fn write(&self, path: &str) -> PyResult<()> {
        self.inner.write(path).map_err(err)
    }

    #[getter]
    fn variant(&self) -> String {
        self.inner.variant.to_string()
    }

    #[getter]
    fn sector(&self) -> &'static str {
        self.inner.sector.short()
    }

    #[getter]
    fn orbital(&self) -> &'static str {
        self.inner.orbital.short()
    }

    #[getter]
    fn shift(&self) -> usize {
        self.inner.shift
    }

    #[getter]
    fn shots(&self) -> u64 {
        self.inner.shots
    }

    #[getter]
    fn accepted(&self) -> u64 {
        self.inner.accepted
    }

    #[getter]
    fn counts(&self) -> Option<Vec<u64>> {
        self.inner.counts.clone()
    }

    #[getter]
    fn frequencies(&self) -> Vec<f64> {
        self.inner.frequencies.clone()
    }

    fn file_name(&self) -> String {
        self.inner.file_name()
    }

    fn __repr__(&self) -> String {
        let h = &self.inner;
        format!("Histogram({} {} {} s={} accepted={}/{})", h.variant, h.sector, h.orbital, h.shift, h.accepted, h.shots)
    }
}

/// End-to-end run: circuits for every setting, sampling, fitting.
#[pyclass(name = "Workflow", module = "qavg", frozen)]
struct PyWorkflow {
    inner: Workflow,
}

#[pymethods]
impl PyWorkflow {
    #[new]
    #[pyo3(signature = (variant="phys1a", shots=500, seed=0, noise=None, rte="exact", delta_mu=1.5, shifts=None, restarts=300))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        variant: &str,
        shots: u64,
        seed: u64,
        noise: Option<(f64, f64, f64)>,
        rte: &str,
        delta_mu: f64,
        shifts: Option<Vec<usize>>,
        restarts: usize,
    ) -> PyResult<Self> {
        let mut cfg = RunConfig {
            variant: variant.parse::<Variant>().map_err(err)?,
            shots,
            seed,
            rte: rte.parse::<RteMode>().map_err(err)?,
            delta_mu,
            shifts: shifts.unwrap_or_default(),
            ..Default::default()
        };
        if let Some((p1, p2, pm)) = noise {
            cfg.noise = NoiseModel::new(p1, p2, pm).map_err(err)?;
        }
        cfg.optimizer.restarts = restarts;
        Ok(PyWorkflow { inner: Workflow::new(cfg).map_err(err)? })
    }

    /// Sampled histograms and, for the logical circuit, the survival record.
    fn sample<'py>(&self, py: Python<'py>) -> PyResult<(Vec<PyHistogram>, Bound<'py, PyAny>)> {
        let (hs, survival) = py.detach(|| self.inner.sample_all()).map_err(err)?;
        let hs = hs.into_iter().map(|inner| PyHistogram { inner }).collect();
        Ok((hs, to_py(py, &survival)?))
    }

    fn exact(&self, py: Python<'_>) -> PyResult<Vec<PyHistogram>> {
        Ok(py.detach(|| self.inner.exact_all()).map_err(err)?.into_iter().map(|inner| PyHistogram { inner }).collect())
    }

    /// Exact pole weights convolved with the QPE kernel.
    fn analytic(&self) -> PyResult<Vec<PyHistogram>> {
        Ok(self.inner.analytic_all().map_err(err)?.into_iter().map(|inner| PyHistogram { inner }).collect())
    }

    fn fit<'py>(&self, py: Python<'py>, histograms: Vec<PyHistogram>, sector_name: &str) -> PyResult<Bound<'py, PyAny>> {
        let hs: Vec<Histogram> = histograms.into_iter().map(|h| h.inner).collect();
        let sector = sector(sector_name)?;
        let fit = py.detach(|| self.inner.fit(&hs, sector)).map_err(err)?;
        to_py(py, &fit)
    }

    fn cost(&self, histograms: Vec<PyHistogram>, sector_name: &str, theta: f64, eps0: f64, eps1: f64) -> PyResult<f64> {
        let hs: Vec<Histogram> = histograms.into_iter().map(|h| h.inner).collect();
        Ok(self.inner.cost(&hs, sector(sector_name)?).map_err(err)?.eval_raw(theta, [eps0, eps1]))
    }

    /// `(h0, hx, hz)` of the sector's single-qubit Hamiltonian.
    fn hamiltonian(&self, sector_name: &str) -> PyResult<(f64, f64, f64)> {
        let h = self.inner.hamiltonian(sector(sector_name)?);
        Ok((h.h0, h.hx, h.hz))
    }

    fn eigenvalues(&self, sector_name: &str) -> PyResult<(f64, f64)> {
        Ok(self.inner.hamiltonian(sector(sector_name)?).eigenvalues())
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.config)
    }

    #[getter]
    fn fci<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.report)
    }
}

/// Exact-diagonalization report of the reference dimer.
#[pyfunction]
#[pyo3(signature = (delta_mu=1.5))]
fn fci(py: Python<'_>, delta_mu: f64) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &FciReport::new(&DimerParams::reference(delta_mu)))
}

/// `(h0, hx, hz)` for sector "e" or "h".
#[pyfunction]
#[pyo3(signature = (sector_name, delta_mu=1.5))]
fn hamiltonian(sector_name: &str, delta_mu: f64) -> PyResult<(f64, f64, f64)> {
    let h = qubit_hamiltonian(&DimerParams::reference(delta_mu), sector(sector_name)?);
    Ok((h.h0, h.hx, h.hz))
}

/// Outcome probabilities of an eigenstate with energy `eps` for one shift.
#[pyfunction]
#[pyo3(signature = (eps, shift=0, t0=5.0, n_qft=3, e_o=-0.8, n_settings=4))]
fn kernel(eps: f64, shift: usize, t0: f64, n_qft: u32, e_o: f64, n_settings: usize) -> PyResult<Vec<f64>> {
    let s = QpeSettings { n_qft, t0, e_o, n_settings, shift };
    s.validate().map_err(err)?;
    Ok(qpe_kernel(eps, &s))
}

/// Nearest-codeword decoding of a 7-bit readout: `(codeword, logical, flipped)`.
#[pyfunction]
fn decode(bits: u8) -> PyResult<(u8, bool, Option<usize>)> {
    if bits >= 128 {
        return Err(err(format!("{bits} is not a 7-bit string")));
    }
    let d = bfc_decode(bits);
    Ok((d.codeword, d.logical, d.flipped))
}

/// DOS from `(theta, eps0, eps1)` of each sector; exact parameters when omitted.
#[pyfunction]
#[pyo3(signature = (electron=None, hole=None, delta_mu=1.5, delta=0.02, e_min=-2.0, e_max=2.0, e_step=0.002))]
#[allow(clippy::too_many_arguments)]
fn dos<'py>(
    py: Python<'py>,
    electron: Option<(f64, f64, f64)>,
    hole: Option<(f64, f64, f64)>,
    delta_mu: f64,
    delta: f64,
    e_min: f64,
    e_max: f64,
    e_step: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let r = FciReport::new(&DimerParams::reference(delta_mu));
    let params = |p: Option<(f64, f64, f64)>, s: Sector| match p {
        Some((t, a, b)) => TrialParams::new(t, a, b, s),
        None => TrialParams::oracle(r.table(s)),
    };
    let grid = EnergyGrid { start: e_min, stop: e_max, step: e_step };
    let spectrum = reconstruct_gf(
        &params(electron, Sector::Electron),
        &params(hole, Sector::Hole),
        &r.natural_orbitals,
        r.ground_state.energy,
        &grid,
        delta,
    )
    .map_err(err)?;
    to_py(py, &spectrum)
}

/// Orbital labels used in histogram names.
#[pyfunction]
fn orbitals() -> Vec<&'static str> {
    Orbital::ALL.iter().map(|o| o.short()).collect()
}

#[pymodule]
fn qavg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHistogram>()?;
    m.add_class::<PyWorkflow>()?;
    m.add_function(wrap_pyfunction!(fci, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    m.add_function(wrap_pyfunction!(dos, m)?)?;
    m.add_function(wrap_pyfunction!(orbitals, m)?)?;
    Ok(())
}
