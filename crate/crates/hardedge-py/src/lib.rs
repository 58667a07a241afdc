use std::sync::Arc;

use ::hardedge::cli::commands::kernel_spec;
use ::hardedge::dpp::{self, GridDpp};
use ::hardedge::linop::{self, DampingFunction, HardEdgeLayout};
use ::hardedge::{kernels, pickrell, specfun, Error};
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Validation(_) | Error::Domain(_) => PyValueError::new_err(e.to_string()),
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyOSError::new_err(e.to_string()),
    }
}

trait OrPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPy<T> for ::hardedge::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// Composite Gauss-Legendre nodes and weights.
#[pyclass(name = "Grid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: Arc<linop::Grid>,
}

#[pymethods]
impl PyGrid {
    /// Uniform panels on (a, b); refined toward 0 when a == 0.
    #[staticmethod]
    #[pyo3(signature = (a, b, panels, ppp, cutoff=None))]
    fn uniform(a: f64, b: f64, panels: usize, ppp: usize, cutoff: Option<f64>) -> PyResult<Self> {
        Ok(PyGrid { inner: Arc::new(linop::make_grid((a, b), panels, ppp, cutoff).py()?) })
    }

    /// Geometric panels toward 0, uniform over the window, geometric up to `upper`.
    #[staticmethod]
    #[pyo3(signature = (upper, window=(0.2, 2.0)))]
    fn hard_edge(upper: f64, window: (f64, f64)) -> PyResult<Self> {
        let l = HardEdgeLayout { window, upper, ..HardEdgeLayout::default() };
        Ok(PyGrid { inner: Arc::new(l.grid().py()?) })
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// sqrt(w_i) K(x_i, x_j) sqrt(w_j) on a grid.
#[pyclass(name = "KernelMatrix", frozen)]
struct PyKernelMatrix {
    inner: linop::KernelMatrix,
}

#[pymethods]
impl PyKernelMatrix {
    /// Nystrom matrix of a named kernel: bessel_modified, bessel_tilde, rescaled, hat, jacobi_cd_s.
    #[staticmethod]
    #[pyo3(signature = (kernel, s, grid, n=None))]
    fn discretize(kernel: &str, s: f64, grid: &PyGrid, n: Option<usize>) -> PyResult<Self> {
        let spec = kernel_spec(kernel, s, n).py()?;
        Ok(PyKernelMatrix { inner: linop::discretize(&spec, &grid.inner).py()? })
    }

    /// Pi^(s,R) for s <= -1.
    #[staticmethod]
    fn perturbed_projection(s: f64, r: f64, grid: &PyGrid) -> PyResult<Self> {
        Ok(PyKernelMatrix { inner: linop::build_h_s_projection(s, r, &grid.inner, None).py()?.projection })
    }

    /// Pi^(s,beta), the projection onto exp(-beta x/2) H^(s).
    #[staticmethod]
    fn damped_projection(s: f64, beta: f64, grid: &PyGrid) -> PyResult<Self> {
        Ok(PyKernelMatrix { inner: linop::build_damped_projection(s, beta, &grid.inner).py()?.projection })
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label.clone()
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: self.inner.grid.clone() }
    }

    fn entries(&self) -> Vec<Vec<f64>> {
        let m = &self.inner.entries;
        (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues()
    }

    fn idempotency_defect(&self) -> f64 {
        self.inner.idempotency_defect()
    }

    /// det(I + sign * K).
    #[pyo3(signature = (sign=-1.0))]
    fn fredholm_det(&self, sign: f64) -> PyResult<f64> {
        linop::fredholm_det(&self.inner, sign).py()
    }

    /// det(I - chi K chi) over the nodes in (lo, hi).
    fn gap_probability(&self, lo: f64, hi: f64) -> PyResult<f64> {
        linop::gap_probability(&self.inner, &self.inner.grid.mask(lo, hi)).py()
    }

    /// B(g, K) with g = exp(-beta x).
    fn damp(&self, beta: f64) -> PyResult<Self> {
        let t = linop::mult_transform(&self.inner, &DampingFunction::ExpDamp { beta }).py()?;
        Ok(PyKernelMatrix { inner: t })
    }

    /// The projection onto chi_(lo,hi) range(K).
    fn induced(&self, lo: f64, hi: f64) -> PyResult<Self> {
        let t = linop::induced_projection(&self.inner, &self.inner.grid.mask(lo, hi)).py()?;
        Ok(PyKernelMatrix { inner: t })
    }

    /// Exact samples of the determinantal process; projections have a fixed count.
    #[pyo3(signature = (count, seed=0))]
    fn sample(&self, py: Python<'_>, count: usize, seed: u64) -> PyResult<PySampleBatch> {
        let dpp = if self.inner.idempotency_defect() < 1e-6 {
            GridDpp::from_projection(&self.inner)
        } else {
            GridDpp::from_kernel(&self.inner)
        }
        .py()?;
        let label = self.inner.label.clone();
        let batch = py.detach(|| dpp.sample(count, seed, &label));
        Ok(PySampleBatch { inner: batch })
    }
}

#[pyclass(name = "SampleBatch", frozen)]
struct PySampleBatch {
    inner: dpp::SampleBatch,
}

#[pymethods]
impl PySampleBatch {
    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn kernel_id(&self) -> String {
        self.inner.kernel_id.clone()
    }

    fn configurations(&self) -> Vec<Vec<f64>> {
        self.inner.configs.iter().map(|c| c.particles.clone()).collect()
    }

    /// Mean of prod exp(-beta x) over the batch.
    fn mean_exp_functional(&self, beta: f64) -> f64 {
        let g = DampingFunction::ExpDamp { beta };
        let n = self.inner.configs.len().max(1) as f64;
        self.inner.configs.iter().map(|c| dpp::multiplicative_functional(c, &g)).sum::<f64>() / n
    }

    fn to_text(&self) -> PyResult<String> {
        let mut buf = vec![];
        dpp::write_batch(&self.inner, &mut buf).py()?;
        Ok(String::from_utf8(buf).expect("batch text is ascii"))
    }

    fn __len__(&self) -> usize {
        self.inner.configs.len()
    }
}

#[pyfunction]
fn jacobi_poly(n: usize, alpha: f64, beta: f64, u: f64) -> PyResult<f64> {
    specfun::jacobi_poly(specfun::JacobiIndex::new(n, alpha, beta).py()?, u).py()
}

#[pyfunction]
fn bessel_j(nu: f64, x: f64) -> PyResult<f64> {
    specfun::bessel_j(specfun::BesselOrder::new(nu).py()?, x).py()
}

#[pyfunction]
fn log_gamma_ratio(a: f64, b: f64) -> PyResult<f64> {
    specfun::log_gamma_ratio(a, b).py()
}

/// K(x1, x2) for a named kernel.
#[pyfunction]
#[pyo3(signature = (kernel, s, x1, x2, n=None))]
fn kernel(kernel: &str, s: f64, x1: f64, x2: f64, n: Option<usize>) -> PyResult<f64> {
    kernel_spec(kernel, s, n).py()?.eval(x1, x2).py()
}

#[pyfunction]
fn cd_jacobi(alpha: f64, beta: f64, n: usize, u1: f64, u2: f64) -> PyResult<f64> {
    kernels::cd_jacobi(alpha, beta, n, u1, u2).py()
}

#[pyfunction]
fn n_s_of(s: f64) -> usize {
    linop::n_s_of(s)
}

#[pyfunction]
#[pyo3(signature = (s, r, r1, r2, grid=None))]
fn xmax_mass_ratio(s: f64, r: f64, r1: f64, r2: f64, grid: Option<&PyGrid>) -> PyResult<f64> {
    let g = match grid {
        Some(g) => g.inner.clone(),
        None => PyGrid::hard_edge(r, (0.2, 2.0_f64.min(0.5 * r)))?.inner,
    };
    linop::xmax_mass_ratio(s, r, r1, r2, &g).py()
}

#[pyfunction]
fn damped_sample(py: Python<'_>, s: f64, beta: f64, grid: &PyGrid, count: usize, seed: u64) -> PyResult<PySampleBatch> {
    let g = grid.inner.clone();
    let batch = py.detach(|| dpp::damped_infinite_sampler(s, beta, &g, count, seed)).py()?;
    Ok(PySampleBatch { inner: batch })
}

/// Metropolis samples of the Jacobi radial density, one per chain.
#[pyfunction]
#[pyo3(signature = (n, s, chains, seed=0))]
fn mcmc_jacobi(py: Python<'_>, n: usize, s: f64, chains: usize, seed: u64) -> PyResult<PySampleBatch> {
    let params = kernels::EnsembleParams::probability(n, s).py()?;
    let cfg = dpp::McmcConfig { chains, samples_per_chain: 1, ..dpp::McmcConfig::default() };
    let (batch, _) = py.detach(|| dpp::mcmc_jacobi_chains(params, &cfg, seed)).py()?;
    Ok(PySampleBatch { inner: batch })
}

#[pyfunction]
fn radial_density_u(s: f64, us: Vec<f64>) -> PyResult<f64> {
    pickrell::radial_density_u(kernels::EnsembleParams::new(us.len(), s).py()?, &us).py()
}

/// (gamma, xs) of the rescaled radial part.
#[pyfunction]
fn to_pickrell_point(lambdas: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let p = pickrell::to_pickrell_point(&pickrell::RadialSample::new(lambdas).py()?);
    Ok((p.gamma, p.xs))
}

#[pyfunction]
fn consistency_constant(m: usize, n: usize, s: f64) -> PyResult<f64> {
    pickrell::consistency_constant(m, n, s).py()
}

#[pyfunction]
fn beta_prime_density(m: usize, n: usize, s: f64, r: f64) -> PyResult<f64> {
    pickrell::beta_prime_density(m, n, s, r).py()
}

#[pyfunction]
fn hellinger(n: usize, s: f64, s2: f64) -> PyResult<f64> {
    pickrell::hellinger(n, s, s2).py()
}

#[pyfunction]
#[pyo3(signature = (s, s2, lo=50, hi=800))]
fn fit_hellinger_constant(s: f64, s2: f64, lo: usize, hi: usize) -> PyResult<f64> {
    pickrell::fit_hellinger_constant(s, s2, lo, hi).py()
}

/// Rows (n, hellinger, partial_product) and the fitted constant.
#[pyfunction]
fn mutual_singularity_evidence(s: f64, s2: f64, n_max: usize) -> PyResult<(Vec<(usize, f64, f64)>, f64)> {
    let t = pickrell::mutual_singularity_evidence(s, s2, n_max).py()?;
    Ok((t.rows.iter().map(|r| (r.n, r.hellinger, r.partial_product)).collect(), t.fitted_c))
}

#[pymodule]
#[pyo3(name = "hardedge")]
pub fn hardedge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyKernelMatrix>()?;
    m.add_class::<PySampleBatch>()?;
    m.add_function(wrap_pyfunction!(jacobi_poly, m)?)?;
    m.add_function(wrap_pyfunction!(bessel_j, m)?)?;
    m.add_function(wrap_pyfunction!(log_gamma_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(cd_jacobi, m)?)?;
    m.add_function(wrap_pyfunction!(n_s_of, m)?)?;
    m.add_function(wrap_pyfunction!(xmax_mass_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(damped_sample, m)?)?;
    m.add_function(wrap_pyfunction!(mcmc_jacobi, m)?)?;
    m.add_function(wrap_pyfunction!(radial_density_u, m)?)?;
    m.add_function(wrap_pyfunction!(to_pickrell_point, m)?)?;
    m.add_function(wrap_pyfunction!(consistency_constant, m)?)?;
    m.add_function(wrap_pyfunction!(beta_prime_density, m)?)?;
    m.add_function(wrap_pyfunction!(hellinger, m)?)?;
    m.add_function(wrap_pyfunction!(fit_hellinger_constant, m)?)?;
    m.add_function(wrap_pyfunction!(mutual_singularity_evidence, m)?)?;
    Ok(())
}
