//! Python module `microrev`.
//!
//! Amplitudes cross the boundary as Python `complex` (floats are accepted);
//! baths are given either as `n_th=` or `beta=`.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use microrev::fock::{self, CoherentSeries, Truncation, DEFAULT_BUDGET};
use microrev::heterodyne::{self, ProtocolConfig};
use microrev::reversibility;
use microrev::{gaussian, BathSpec, BeamSplitterSpec, ComplexAmplitude, EnergyStatistics, Error};

create_exception!(
    microrev,
    MicrorevError,
    PyRuntimeError,
    "A computation could not be completed."
);

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Parse(_) | Error::DegenerateBath => PyValueError::new_err(e.to_string()),
        _ => MicrorevError::new_err(e.to_string()),
    }
}

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T> OrRaise<T> for microrev::Result<T> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn amp(z: Complex64) -> PyResult<ComplexAmplitude> {
    ComplexAmplitude::new(z.re, z.im).or_raise()
}

fn bath(n_th: Option<f64>, beta: Option<f64>) -> PyResult<BathSpec> {
    match (n_th, beta) {
        (Some(n), None) => BathSpec::from_nth(n).or_raise(),
        (None, Some(b)) => BathSpec::from_beta(b).or_raise(),
        _ => Err(PyValueError::new_err("give exactly one of n_th= or beta=")),
    }
}

fn truncation(dim: usize, budget: f64) -> PyResult<Truncation> {
    if dim < 2 || budget.is_nan() || budget <= 0.0 {
        return Err(PyValueError::new_err(format!(
            "need dim >= 2 and budget > 0, got {dim}, {budget}"
        )));
    }
    Ok(Truncation::new(dim).with_budget(budget))
}

#[pyclass(name = "BathSpec", module = "microrev", frozen)]
struct PyBath(BathSpec);

#[pymethods]
impl PyBath {
    #[new]
    #[pyo3(signature = (*, n_th = None, beta = None))]
    fn new(n_th: Option<f64>, beta: Option<f64>) -> PyResult<Self> {
        bath(n_th, beta).map(PyBath)
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta()
    }

    #[getter]
    fn n_th(&self) -> f64 {
        self.0.n_th()
    }

    fn __repr__(&self) -> String {
        format!("BathSpec(n_th={}, beta={})", self.0.n_th(), self.0.beta())
    }
}

/// Forward/backward transition of a coherent state through a beam splitter
/// coupled to a thermal mode.
#[pyclass(name = "TransitionQuery", module = "microrev", frozen)]
struct PyQuery(microrev::TransitionQuery);

#[pymethods]
impl PyQuery {
    #[new]
    #[pyo3(signature = (alpha_i, alpha_f, tau, *, n_th = None, beta = None))]
    fn new(alpha_i: Complex64, alpha_f: Complex64, tau: f64, n_th: Option<f64>, beta: Option<f64>) -> PyResult<Self> {
        let bs = BeamSplitterSpec::from_tau(tau).or_raise()?;
        microrev::TransitionQuery::new(amp(alpha_i)?, amp(alpha_f)?, bath(n_th, beta)?, bs)
            .or_raise()
            .map(PyQuery)
    }

    #[getter]
    fn alpha_i(&self) -> Complex64 {
        self.0.alpha_i.into()
    }

    #[getter]
    fn alpha_f(&self) -> Complex64 {
        self.0.alpha_f.into()
    }

    #[getter]
    fn bath(&self) -> PyBath {
        PyBath(self.0.bath)
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.bs.tau()
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.bs.theta()
    }

    /// Exact Gaussian engine.
    fn evaluate(&self) -> PyResult<PyTransitionResult> {
        reversibility::evaluate(&self.0).or_raise().map(PyTransitionResult)
    }

    /// Truncated Fock-space oracle with `dim` levels per mode.
    #[pyo3(signature = (dim = 40, budget = DEFAULT_BUDGET))]
    fn evaluate_fock(&self, py: Python<'_>, dim: usize, budget: f64) -> PyResult<PyTransitionResult> {
        let trunc = truncation(dim, budget)?;
        let q = self.0;
        py.detach(|| reversibility::evaluate_fock(&q, trunc))
            .or_raise()
            .map(PyTransitionResult)
    }

    fn forward_probability(&self) -> f64 {
        gaussian::forward_probability(&self.0)
    }

    fn backward_probability(&self) -> PyResult<f64> {
        gaussian::backward_probability(&self.0).or_raise()
    }

    /// Simulated heterodyne protocol with `n` samples per direction.
    #[pyo3(signature = (n = 50_000, seed = 0))]
    fn run_protocol(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<PyProtocolOutcome> {
        let q = self.0;
        py.detach(|| heterodyne::run_protocol(&q, ProtocolConfig::new(n, seed)))
            .or_raise()
            .map(PyProtocolOutcome)
    }

    #[pyo3(signature = (n = 50_000, seed = 0))]
    fn estimate_log_ratio(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<PyBootstrapEstimate> {
        let q = self.0;
        py.detach(|| heterodyne::estimate_log_ratio(&q, n, seed))
            .or_raise()
            .map(PyBootstrapEstimate)
    }

    fn __repr__(&self) -> String {
        format!(
            "TransitionQuery(alpha_i={}, alpha_f={}, tau={}, n_th={})",
            self.0.alpha_i,
            self.0.alpha_f,
            self.0.bs.tau(),
            self.0.bath.n_th()
        )
    }
}

#[pyclass(name = "TransitionResult", module = "microrev", frozen)]
struct PyTransitionResult(microrev::TransitionResult);

#[pymethods]
impl PyTransitionResult {
    #[getter]
    fn p_fwd(&self) -> f64 {
        self.0.p_fwd
    }
    #[getter]
    fn p_bwd(&self) -> f64 {
        self.0.p_bwd
    }
    #[getter]
    fn log_ratio(&self) -> f64 {
        self.0.log_ratio
    }
    #[getter]
    fn predicted_log_ratio(&self) -> f64 {
        self.0.predicted_log_ratio
    }
    #[getter]
    fn heat(&self) -> f64 {
        self.0.heat
    }
    #[getter]
    fn classical_log_ratio(&self) -> f64 {
        self.0.classical_log_ratio
    }
    #[getter]
    fn log_upsilon(&self) -> f64 {
        self.0.log_upsilon
    }
    #[getter]
    fn upsilon(&self) -> f64 {
        self.0.upsilon()
    }
    #[getter]
    fn alpha_sq_tot(&self) -> f64 {
        self.0.alpha_sq_tot
    }
    #[getter]
    fn delta_alpha_sq(&self) -> f64 {
        self.0.delta_alpha_sq
    }

    fn __repr__(&self) -> String {
        format!(
            "TransitionResult(log_ratio={}, predicted_log_ratio={}, log_upsilon={})",
            self.0.log_ratio, self.0.predicted_log_ratio, self.0.log_upsilon
        )
    }
}

#[pyclass(name = "DisplacedThermalState", module = "microrev", frozen)]
struct PyDisplacedThermal(microrev::DisplacedThermalState);

#[pymethods]
impl PyDisplacedThermal {
    #[new]
    fn new(mu: Complex64, nbar: f64) -> PyResult<Self> {
        microrev::DisplacedThermalState::new(amp(mu)?, nbar)
            .or_raise()
            .map(PyDisplacedThermal)
    }

    #[getter]
    fn mu(&self) -> Complex64 {
        self.0.mu.into()
    }

    #[getter]
    fn nbar(&self) -> f64 {
        self.0.nbar
    }

    fn q_function(&self, alpha: Complex64) -> PyResult<f64> {
        Ok(gaussian::q_function(&self.0, amp(alpha)?))
    }

    /// `n` heterodyne outcomes as a dataset.
    #[pyo3(signature = (n, seed = 0))]
    fn sample(&self, n: usize, seed: u64) -> PyResult<PyDataset> {
        heterodyne::sample_heterodyne(&self.0, n, seed)
            .or_raise()
            .map(PyDataset)
    }
}

#[pyclass(name = "HeterodyneDataset", module = "microrev", frozen)]
struct PyDataset(microrev::HeterodyneDataset);

#[pymethods]
impl PyDataset {
    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.0.seed()
    }

    /// Outcomes as `(x, p)` quadrature pairs.
    fn quadratures(&self) -> Vec<(f64, f64)> {
        self.0.samples().iter().map(|s| (s.x, s.p)).collect()
    }

    fn fit(&self) -> PyResult<PyFit> {
        heterodyne::ml_fit(&self.0).or_raise().map(PyFit)
    }
}

#[pyclass(name = "IsotropicGaussianFit", module = "microrev", frozen)]
struct PyFit(microrev::IsotropicGaussianFit);

#[pymethods]
impl PyFit {
    #[getter]
    fn mean(&self) -> Complex64 {
        self.0.mean.into()
    }
    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance
    }
    #[getter]
    fn n_samples(&self) -> usize {
        self.0.n_samples
    }
    #[getter]
    fn nbar(&self) -> f64 {
        self.0.nbar()
    }

    fn log_density(&self, alpha: Complex64) -> PyResult<f64> {
        self.0.log_density(amp(alpha)?).or_raise()
    }

    fn __repr__(&self) -> String {
        format!(
            "IsotropicGaussianFit(mean={}, variance={})",
            self.0.mean, self.0.variance
        )
    }
}

#[pyclass(name = "BootstrapEstimate", module = "microrev", frozen)]
struct PyBootstrapEstimate(microrev::BootstrapEstimate);

#[pymethods]
impl PyBootstrapEstimate {
    #[getter]
    fn point(&self) -> f64 {
        self.0.point
    }
    #[getter]
    fn std_error(&self) -> f64 {
        self.0.std_error
    }
    #[getter]
    fn ci_low(&self) -> f64 {
        self.0.ci_low
    }
    #[getter]
    fn ci_high(&self) -> f64 {
        self.0.ci_high
    }
    #[getter]
    fn n_resamples(&self) -> usize {
        self.0.n_resamples
    }
    #[getter]
    fn resample_size(&self) -> usize {
        self.0.resample_size
    }

    fn __repr__(&self) -> String {
        format!(
            "BootstrapEstimate(point={}, std_error={}, ci=[{}, {}])",
            self.0.point, self.0.std_error, self.0.ci_low, self.0.ci_high
        )
    }
}

#[pyclass(name = "ProtocolOutcome", module = "microrev", frozen)]
struct PyProtocolOutcome(heterodyne::ProtocolOutcome);

#[pymethods]
impl PyProtocolOutcome {
    #[getter]
    fn forward_fit(&self) -> PyFit {
        PyFit(self.0.forward_fit)
    }
    #[getter]
    fn backward_fit(&self) -> PyFit {
        PyFit(self.0.backward_fit)
    }
    #[getter]
    fn log_p_forward(&self) -> f64 {
        self.0.log_p_forward
    }
    #[getter]
    fn log_p_backward(&self) -> f64 {
        self.0.log_p_backward
    }
    #[getter]
    fn estimate(&self) -> PyBootstrapEstimate {
        PyBootstrapEstimate(self.0.estimate)
    }
    #[getter]
    fn predicted_log_ratio(&self) -> f64 {
        self.0.predicted_log_ratio
    }
}

/// Pure state in a truncated Fock basis.
#[pyclass(name = "FockKet", module = "microrev", frozen, from_py_object)]
#[derive(Clone)]
struct PyFockKet(fock::FockKet);

#[pymethods]
impl PyFockKet {
    /// Normalizes `amplitudes` (index = photon number).
    #[new]
    fn new(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        fock::FockKet::from_amplitudes(amplitudes).or_raise().map(PyFockKet)
    }

    #[staticmethod]
    fn number(n: usize, dim: usize) -> PyResult<Self> {
        fock::FockKet::number(n, dim).or_raise().map(PyFockKet)
    }

    #[staticmethod]
    #[pyo3(signature = (alpha, dim, budget = DEFAULT_BUDGET))]
    fn coherent(alpha: Complex64, dim: usize, budget: f64) -> PyResult<Self> {
        fock::coherent_ket(amp(alpha)?, truncation(dim, budget)?)
            .or_raise()
            .map(PyFockKet)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.0.amplitudes().to_vec()
    }

    fn mean_number(&self) -> f64 {
        self.0.mean_number()
    }

    fn number_variance(&self) -> f64 {
        self.0.number_variance()
    }

    fn time_reversed(&self) -> Self {
        PyFockKet(self.0.time_reversed())
    }

    fn inner(&self, other: &PyFockKet) -> Complex64 {
        self.0.inner(&other.0)
    }
}

#[pyclass(name = "GeneralRatio", module = "microrev", frozen)]
struct PyGeneralRatio(fock::GeneralRatio);

#[pymethods]
impl PyGeneralRatio {
    #[getter]
    fn lhs(&self) -> f64 {
        self.0.lhs
    }
    #[getter]
    fn rhs(&self) -> f64 {
        self.0.rhs
    }
    #[getter]
    fn p_fwd(&self) -> f64 {
        self.0.p_fwd
    }
    #[getter]
    fn p_bwd(&self) -> f64 {
        self.0.p_bwd
    }
    fn relative_error(&self) -> f64 {
        self.0.relative_error()
    }
}

/// A `FockKet`, or an amplitude standing for the exact coherent state.
#[derive(FromPyObject)]
enum StateArg {
    Ket(PyFockKet),
    Coherent(Complex64),
}

impl StateArg {
    fn stats(&self) -> PyResult<Box<dyn EnergyStatistics>> {
        Ok(match self {
            StateArg::Ket(k) => Box::new(k.0.clone()),
            StateArg::Coherent(z) => Box::new(CoherentSeries(amp(*z)?)),
        })
    }
}

#[pyfunction]
#[pyo3(signature = (alpha_i, alpha_f, *, n_th = None, beta = None))]
fn predicted_log_ratio(alpha_i: Complex64, alpha_f: Complex64, n_th: Option<f64>, beta: Option<f64>) -> PyResult<f64> {
    Ok(reversibility::predicted_log_ratio(
        amp(alpha_i)?,
        amp(alpha_f)?,
        &bath(n_th, beta)?,
    ))
}

#[pyfunction]
#[pyo3(signature = (alpha_i, alpha_f, *, n_th = None, beta = None))]
fn classical_log_ratio(alpha_i: Complex64, alpha_f: Complex64, n_th: Option<f64>, beta: Option<f64>) -> PyResult<f64> {
    Ok(reversibility::classical_log_ratio(
        amp(alpha_i)?,
        amp(alpha_f)?,
        &bath(n_th, beta)?,
    ))
}

/// `|α_f|² − |α_i|²`, the energy the system absorbs.
#[pyfunction]
fn heat(alpha_i: Complex64, alpha_f: Complex64) -> PyResult<f64> {
    Ok(reversibility::heat(amp(alpha_i)?, amp(alpha_f)?))
}

/// `log Υ` in closed form for coherent states.
#[pyfunction]
#[pyo3(signature = (alpha_i, alpha_f, *, n_th = None, beta = None))]
fn log_upsilon_closed_form(
    alpha_i: Complex64,
    alpha_f: Complex64,
    n_th: Option<f64>,
    beta: Option<f64>,
) -> PyResult<f64> {
    Ok(reversibility::upsilon_closed_form(
        amp(alpha_i)?,
        amp(alpha_f)?,
        &bath(n_th, beta)?,
    ))
}

/// `log Υ` from tilted energy expectations of two pure states.
#[pyfunction]
#[pyo3(signature = (psi_i, psi_f, *, n_th = None, beta = None))]
fn log_upsilon_from_definition(
    psi_i: StateArg,
    psi_f: StateArg,
    n_th: Option<f64>,
    beta: Option<f64>,
) -> PyResult<f64> {
    let b = bath(n_th, beta)?;
    reversibility::upsilon_from_definition(&*psi_i.stats()?, &*psi_f.stats()?, &b).or_raise()
}

/// Backward-process amplitudes `(α̃_i, α̃_f)`.
#[pyfunction]
fn gibbs_rescale_pair(alpha_i: Complex64, alpha_f: Complex64, beta: f64) -> PyResult<(Complex64, Complex64)> {
    let p = reversibility::gibbs_rescale_pair(amp(alpha_i)?, amp(alpha_f)?, beta);
    Ok((p.alpha_i_tilde.into(), p.alpha_f_tilde.into()))
}

#[pyfunction]
fn nth_from_beta(beta: f64) -> PyResult<f64> {
    reversibility::nth_from_beta(beta).or_raise()
}

#[pyfunction]
fn beta_from_nth(n_th: f64) -> PyResult<f64> {
    reversibility::beta_from_nth(n_th).or_raise()
}

/// `⟨α|α·e^{β/2}⟩` in the Fock basis.
#[pyfunction]
#[pyo3(signature = (alpha, beta, dim = 60))]
fn rescaled_overlap(alpha: Complex64, beta: f64, dim: usize) -> PyResult<Complex64> {
    fock::rescaled_overlap(amp(alpha)?, beta, truncation(dim, DEFAULT_BUDGET)?).or_raise()
}

#[pyfunction]
#[pyo3(signature = (psi_i, psi_f, tau, *, n_th = None, beta = None, dim = 50))]
fn general_ratio_check(
    py: Python<'_>,
    psi_i: PyFockKet,
    psi_f: PyFockKet,
    tau: f64,
    n_th: Option<f64>,
    beta: Option<f64>,
    dim: usize,
) -> PyResult<PyGeneralRatio> {
    let (b, bs, trunc) = (
        bath(n_th, beta)?,
        BeamSplitterSpec::from_tau(tau).or_raise()?,
        truncation(dim, DEFAULT_BUDGET)?,
    );
    py.detach(|| fock::general_ratio_check(&psi_i.0, &psi_f.0, &b, bs.theta(), trunc))
        .or_raise()
        .map(PyGeneralRatio)
}

/// Trace distance moved by one splitter pass on the joint equilibrium state.
#[pyfunction]
#[pyo3(signature = (theta, *, n_th = None, beta = None, dim = 60))]
fn fixed_point_check(py: Python<'_>, theta: f64, n_th: Option<f64>, beta: Option<f64>, dim: usize) -> PyResult<f64> {
    let (b, trunc) = (bath(n_th, beta)?, truncation(dim, DEFAULT_BUDGET)?);
    py.detach(|| fock::fixed_point_check(&b, theta, trunc)).or_raise()
}

#[pyfunction]
fn energy_conservation_check(theta: f64, dim: usize) -> PyResult<f64> {
    fock::energy_conservation_check(theta, dim).or_raise()
}

#[pyfunction]
fn derive_seed(base: u64, index: u64) -> u64 {
    heterodyne::derive_seed(base, index)
}

#[pymodule(name = "microrev")]
pub fn microrev_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("MicrorevError", m.py().get_type::<MicrorevError>())?;
    m.add_class::<PyBath>()?;
    m.add_class::<PyQuery>()?;
    m.add_class::<PyTransitionResult>()?;
    m.add_class::<PyDisplacedThermal>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyFit>()?;
    m.add_class::<PyBootstrapEstimate>()?;
    m.add_class::<PyProtocolOutcome>()?;
    m.add_class::<PyFockKet>()?;
    m.add_class::<PyGeneralRatio>()?;
    m.add_function(wrap_pyfunction!(predicted_log_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(classical_log_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(heat, m)?)?;
    m.add_function(wrap_pyfunction!(log_upsilon_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(log_upsilon_from_definition, m)?)?;
    m.add_function(wrap_pyfunction!(gibbs_rescale_pair, m)?)?;
    m.add_function(wrap_pyfunction!(nth_from_beta, m)?)?;
    m.add_function(wrap_pyfunction!(beta_from_nth, m)?)?;
    m.add_function(wrap_pyfunction!(rescaled_overlap, m)?)?;
    m.add_function(wrap_pyfunction!(general_ratio_check, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_check, m)?)?;
    m.add_function(wrap_pyfunction!(energy_conservation_check, m)?)?;
    m.add_function(wrap_pyfunction!(derive_seed, m)?)?;
    Ok(())
}
