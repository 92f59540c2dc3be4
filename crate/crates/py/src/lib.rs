//! Python bindings. Matrices cross the boundary as nested lists of complex
//! numbers, row-major, so `numpy.ndarray.tolist()` output is accepted.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;

use qnet_core::dynamics::{self, DensityOperator, Trajectory};
use qnet_core::identify::{self, IdentificationReport, IdentifyConfig, SolveOptions};
use qnet_core::linalg::{Admissible, CMatrix, Hermitian, DEFAULT_RTOL};
use qnet_core::netmodel::{self, SeededRng};
use qnet_core::partialinfo::{self, InitialStateBatch, OutputSelector};
use qnet_core::{io, Error};

create_exception!(qnet, NumericalError, PyArithmeticError);

type Rows = Vec<Vec<Complex64>>;

fn err(e: Error) -> PyErr {
    match e {
        Error::NotObservable { .. } | Error::NotLiouvillian { .. } | Error::ZeroGroundTruth => {
            NumericalError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_matrix(rows: &Rows) -> PyResult<CMatrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || rows.iter().any(|r| r.len() != m) {
        return Err(PyValueError::new_err("expected a non-empty rectangular nested list"));
    }
    Ok(CMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn to_rows(m: &CMatrix) -> Rows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn hermitian(rows: &Rows) -> PyResult<Hermitian> {
    Hermitian::new(to_matrix(rows)?).map_err(err)
}

fn density(rows: &Rows) -> PyResult<DensityOperator> {
    DensityOperator::new(to_matrix(rows)?).map_err(err)
}

fn admissible(rows: &Rows) -> PyResult<Admissible> {
    Admissible::new(to_matrix(rows)?).map_err(err)
}

/// Sampled trajectory ρ_0, ρ_dt, ..., ρ_τ.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(Trajectory);

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.0.dt()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __len__(&self) -> usize {
        self.0.states().len()
    }

    fn times(&self) -> Vec<f64> {
        (0..self.0.states().len()).map(|k| self.0.time(k)).collect()
    }

    fn state(&self, k: usize) -> PyResult<Rows> {
        self.0
            .states()
            .get(k)
            .map(|s| to_rows(s.matrix()))
            .ok_or_else(|| PyValueError::new_err(format!("sample {k} out of range")))
    }

    fn to_csv(&self) -> String {
        io::trajectory_to_csv(&self.0)
    }

    #[staticmethod]
    fn from_csv(text: &str) -> PyResult<Self> {
        io::trajectory_from_csv(text).map(PyTrajectory).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Trajectory(dim={}, tau={}, dt={})", self.0.dim(), self.0.tau(), self.0.dt())
    }
}

/// Result of solving `[M, P] = Q`.
#[pyclass(name = "Report", frozen)]
struct PyReport(IdentificationReport);

#[pymethods]
impl PyReport {
    /// "unique", "non_unique" or "inconsistent"
    #[getter]
    fn outcome(&self) -> String {
        self.0.outcome.to_string()
    }

    #[getter]
    fn estimate(&self) -> Rows {
        to_rows(self.0.estimate.matrix())
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank
    }

    #[getter]
    fn required_rank(&self) -> usize {
        self.0.required_rank
    }

    #[getter]
    fn residual(&self) -> f64 {
        self.0.residual
    }

    #[getter]
    fn epsilon(&self) -> Option<f64> {
        self.0.epsilon
    }

    #[getter]
    fn solvability(&self) -> u8 {
        self.0.solvability()
    }

    #[getter]
    fn trusted(&self) -> bool {
        self.0.trusted()
    }

    #[getter]
    fn notes(&self) -> Vec<String> {
        self.0.notes.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "Report(outcome={}, rank={}/{}, residual={:.3e})",
            self.0.outcome, self.0.rank, self.0.required_rank, self.0.residual
        )
    }
}

/// Adjacency matrix of a seeded Erdős–Rényi graph, which is also the
/// Hamiltonian of its quantum walk.
#[pyfunction]
#[pyo3(signature = (d, p_link=0.5, seed=0))]
fn erdos_renyi(d: usize, p_link: f64, seed: u64) -> PyResult<Rows> {
    let mut rng = SeededRng::new(seed).next_rng();
    let g = netmodel::erdos_renyi(d, p_link, &mut rng).map_err(err)?;
    Ok(to_rows(&g.to_matrix()))
}

/// `|k><k|` with 0-based `k`.
#[pyfunction]
fn basis_density(d: usize, k: usize) -> PyResult<Rows> {
    Ok(to_rows(netmodel::basis_density(d, k).map_err(err)?.matrix()))
}

#[pyfunction]
#[pyo3(signature = (h, rho0, tau, dt, hbar=1.0))]
fn simulate(h: Rows, rho0: Rows, tau: f64, dt: f64, hbar: f64) -> PyResult<PyTrajectory> {
    let traj = dynamics::sample_trajectory(&hermitian(&h)?, &density(&rho0)?, tau, dt, hbar).map_err(err)?;
    Ok(PyTrajectory(traj))
}

#[pyfunction]
#[pyo3(signature = (h, hbar=1.0))]
fn liouvillian(h: Rows, hbar: f64) -> PyResult<Rows> {
    Ok(to_rows(dynamics::liouvillian(&hermitian(&h)?, hbar).map_err(err)?.matrix()))
}

/// Closed-form `∫_0^τ ρ_t dt`.
#[pyfunction]
#[pyo3(signature = (h, rho0, tau, hbar=1.0))]
fn exact_gram(h: Rows, rho0: Rows, tau: f64, hbar: f64) -> PyResult<Rows> {
    let p = dynamics::exact_gram(&hermitian(&h)?, &density(&rho0)?, tau, hbar).map_err(err)?;
    Ok(to_rows(p.matrix()))
}

#[pyfunction]
#[pyo3(signature = (trajectory, subsample=1))]
fn gram_trapezoid(trajectory: &PyTrajectory, subsample: usize) -> PyResult<Rows> {
    Ok(to_rows(identify::build_p_trapezoid(&trajectory.0, subsample).map_err(err)?.matrix()))
}

/// Identify the interaction Hamiltonian from a trajectory.
#[pyfunction]
#[pyo3(name = "identify", signature = (trajectory, subsample=1, hbar=1.0, known_h0=None, truth=None, rtol=DEFAULT_RTOL, residual_tol=None))]
fn identify_trajectory(
    trajectory: &PyTrajectory,
    subsample: usize,
    hbar: f64,
    known_h0: Option<Rows>,
    truth: Option<Rows>,
    rtol: f64,
    residual_tol: Option<f64>,
) -> PyResult<PyReport> {
    let known_h0 = known_h0.as_ref().map(hermitian).transpose()?;
    let truth = truth.as_ref().map(admissible).transpose()?;
    let cfg = IdentifyConfig {
        subsample,
        hbar,
        solve: SolveOptions { rtol, residual_tol },
    };
    identify::identify_topology(&trajectory.0, &cfg, known_h0.as_ref(), truth.as_ref())
        .map(PyReport)
        .map_err(err)
}

/// Solve `[M, P] = Q` directly for Hermitian zero-diagonal `M`.
#[pyfunction]
#[pyo3(signature = (p, q, rtol=DEFAULT_RTOL, residual_tol=Some(identify::RESIDUAL_TOL)))]
fn solve_commutator(p: Rows, q: Rows, rtol: f64, residual_tol: Option<f64>) -> PyResult<PyReport> {
    identify::solve_commutator(&hermitian(&p)?, &to_matrix(&q)?, &SolveOptions { rtol, residual_tol })
        .map(PyReport)
        .map_err(err)
}

/// Dimension of the space of Hermitian zero-diagonal matrices commuting with `p`.
#[pyfunction]
#[pyo3(signature = (p, rtol=DEFAULT_RTOL))]
fn commutant_dimension(p: Rows, rtol: f64) -> PyResult<usize> {
    identify::commutant_dimension(&hermitian(&p)?, rtol).map_err(err)
}

#[pyfunction]
fn relative_error(estimate: Rows, truth: Rows) -> PyResult<f64> {
    identify::relative_error(&admissible(&estimate)?, &admissible(&truth)?).map_err(err)
}

/// `(rank, required)` of the diagonal-output observability matrix.
#[pyfunction]
#[pyo3(signature = (h, hbar=1.0, rtol=DEFAULT_RTOL))]
fn observability_rank(h: Rows, hbar: f64, rtol: f64) -> PyResult<(usize, usize)> {
    let h = hermitian(&h)?;
    let c = OutputSelector::diagonal(h.dim()).map_err(err)?;
    let l = dynamics::liouvillian(&h, hbar).map_err(err)?;
    let r = partialinfo::observability_rank(&c, &l, rtol).map_err(err)?;
    Ok((r.rank, r.required))
}

/// Recover the traceless Hamiltonian from exact diagonal-output derivative
/// stacks generated by `h`.
#[pyfunction]
#[pyo3(signature = (h, hbar=1.0, rtol=DEFAULT_RTOL, physical=false))]
fn partial_identify(h: Rows, hbar: f64, rtol: f64, physical: bool) -> PyResult<Rows> {
    let h = hermitian(&h)?;
    let d = h.dim();
    let batch = if physical {
        InitialStateBatch::physical(d).map_err(err)?
    } else {
        InitialStateBatch::identity(d)
    };
    let c = OutputSelector::diagonal(d).map_err(err)?;
    let l = dynamics::liouvillian(&h, hbar).map_err(err)?;
    let stacks = partialinfo::exact_derivative_stacks(&c, &l, &batch, d * d).map_err(err)?;
    let l_hat = partialinfo::reconstruct_liouvillian(&stacks, &batch, hbar, rtol).map_err(err)?;
    Ok(to_rows(partialinfo::extract_hamiltonian(&l_hat).map_err(err)?.matrix()))
}

/// `|k><j|` as `[(coefficient, state), ...]` over preparable states.
#[pyfunction]
fn decompose(d: usize, k: usize, j: usize) -> PyResult<Vec<(Complex64, Rows)>> {
    let terms = partialinfo::physical_decomposition(d, k, j).map_err(err)?;
    Ok(terms.iter().map(|(s, c)| (*c, to_rows(s.matrix()))).collect())
}

#[pymodule]
fn qnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyReport>()?;
    m.add_function(wrap_pyfunction!(erdos_renyi, m)?)?;
    m.add_function(wrap_pyfunction!(basis_density, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(liouvillian, m)?)?;
    m.add_function(wrap_pyfunction!(exact_gram, m)?)?;
    m.add_function(wrap_pyfunction!(gram_trapezoid, m)?)?;
    m.add_function(wrap_pyfunction!(identify_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(solve_commutator, m)?)?;
    m.add_function(wrap_pyfunction!(commutant_dimension, m)?)?;
    m.add_function(wrap_pyfunction!(relative_error, m)?)?;
    m.add_function(wrap_pyfunction!(observability_rank, m)?)?;
    m.add_function(wrap_pyfunction!(partial_identify, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    Ok(())
}
